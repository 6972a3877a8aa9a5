"""Span-wise closed forms of the z-integrals of the first-order kernels.

Frequencies are passed as arrays of shape ``(..., 3)`` holding
``(w1, w2, w3)`` in rad/s. Within a span the normalized power profile is
``exp(-delta_{m-1} - alpha_m (z - z_{m-1}))`` and the kernel phase is
``(w2 - w1)(w2 - w3)`` times the accumulated dispersion, so each span
integral reduces to exponential integrals over the span length.

All span functions return an array with a trailing span axis of length
``link.n_spans`` unless a single span index ``m`` (1-based) is requested.
"""

import numpy as np

from .link import depletion_exponents, noise_accumulators

# |x L| below which (1 - exp(-x L)) / x switches to its Taylor series
_SERIES_F = 1e-3
# max(|b|, |c|) L below which the nested span integral uses a double series
_SERIES_J = 2e-2


def band_centers(plan, s, sp):
    """Center frequencies gating (w1, w2, w3) for the (s, s') FWM region."""
    return np.array([plan.detuning(s), plan.detuning(s + sp), plan.detuning(sp)])


def gating_pi(w, s, sp, plan):
    """Nyquist gate: T^2 inside all four pulse bands, 0 outside (open bands)."""
    w = np.asarray(w, dtype=float)
    half = np.pi / plan.symbol_time
    c = band_centers(plan, s, sp)
    inside = np.all(np.abs(w - c) < half, axis=-1)
    inside &= np.abs(w[..., 0] - w[..., 1] + w[..., 2]) < half
    return np.where(inside, plan.symbol_time**2, 0.0)


def dispersion_product(w):
    w = np.asarray(w, dtype=float)
    return (w[..., 1] - w[..., 0]) * (w[..., 1] - w[..., 2])


def exp_integral(x, length):
    """F(x) = int_0^L exp(-x u) du for complex x, stable as x -> 0."""
    x = np.asarray(x, dtype=complex)
    y = x * length
    small = np.abs(y) < _SERIES_F
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        direct = -np.expm1(-y) / x
    series = length * (1 - y / 2 + y**2 / 6 - y**3 / 24 + y**4 / 120)
    return np.where(small, series, direct)


def nested_integral(b, c, length):
    """J = int_0^L du exp(-c u) int_0^u du' exp(-b u')."""
    b = np.asarray(b, dtype=complex)
    c = np.asarray(c, dtype=complex)
    b, c = np.broadcast_arrays(b, c)
    big_b = np.abs(b) >= np.abs(c)
    with np.errstate(divide="ignore", invalid="ignore"):
        via_b = (exp_integral(c, length) - exp_integral(b + c, length)) / b
        via_c = (exp_integral(b + c, length) - np.exp(-c * length) * exp_integral(b, length)) / c
    out = np.where(big_b, via_b, via_c)
    small = np.maximum(np.abs(b), np.abs(c)) * length < _SERIES_J
    if np.any(small):
        bs, cs = b[small], c[small]
        acc = np.zeros(bs.shape, dtype=complex)
        fact = np.cumprod([1.0] + list(range(1, 9)))
        for i in range(8):
            for j in range(8 - i):
                acc += ((-cs) ** i / fact[i] * (-bs) ** j / fact[j]
                        * length ** (i + j + 2) / ((j + 1) * (i + j + 2)))
        out = np.array(out)
        out[small] = acc
    return out


def _span_prefactor(q, link, delta):
    """exp(-delta_{m-1} + i q B(z_{m-1})) with B the accumulated dispersion."""
    q = np.asarray(q, dtype=float)[..., None]
    return np.exp(-delta[:-1] + 1j * q * link.acc_dispersion[:-1])


def span_integrals(q, link, delta):
    """r / Pi for every span, given the dispersion products ``q``."""
    qe = np.asarray(q, dtype=float)[..., None]
    lengths = np.diff(link.z)
    x = link.alpha - 1j * qe * link.beta2
    return _span_prefactor(q, link, delta) * exp_integral(x, lengths)


def span_pair_integrals(q, qp, link, delta):
    """I / (Pi Pi') for every span."""
    qe = np.asarray(q, dtype=float)[..., None]
    qpe = np.asarray(qp, dtype=float)[..., None]
    lengths = np.diff(link.z)
    c = link.alpha - 1j * qe * link.beta2
    b = link.alpha + 1j * qpe * link.beta2
    pref = _span_prefactor(q, link, delta) * np.conj(_span_prefactor(qp, link, delta))
    return pref * nested_integral(b, c, lengths)


def _delta(link, plan, power):
    return depletion_exponents(link, plan.power if power is None else power)[1]


def span_r(w, s, sp, link, plan, m=None, power=None):
    """r_{w,m} = int over span m of H_{w,s,s'}(z) dz  [s^2 m]."""
    w = np.asarray(w, dtype=float)
    r = gating_pi(w, s, sp, plan)[..., None] * span_integrals(
        dispersion_product(w), link, _delta(link, plan, power))
    return r if m is None else r[..., m - 1]


def span_pair_I(w, wp, s, sp, link, plan, m=None, power=None):
    """I_{w,w',m}: nested integral of H_w(z) H*_{w'}(z') over span m."""
    w = np.asarray(w, dtype=float)
    wp = np.asarray(wp, dtype=float)
    gate = gating_pi(w, s, sp, plan) * gating_pi(wp, s, sp, plan)
    out = gate[..., None] * span_pair_integrals(
        dispersion_product(w), dispersion_product(wp), link, _delta(link, plan, power))
    return out if m is None else out[..., m - 1]


def assemble_R(r, rp, pair_I, psi):
    """R_{w,w'} = sum_m r_m h_m + sum_m psi_m I_m, h_m = sum_{j<m} psi_j r'*_j.

    ``r``, ``rp`` and ``pair_I`` carry a trailing span axis; ``psi`` is the
    per-span noise prefix sum from :func:`nsni.link.noise_accumulators`.
    """
    weighted = psi * np.conj(rp)
    h = np.cumsum(weighted, axis=-1) - weighted
    return np.sum(r * h, axis=-1) + np.sum(psi * pair_I, axis=-1)


def assemble_R_diag(r, psi):
    """Re R_{w,w} using Re I_{w,w,m} = |r_m|^2 / 2."""
    weighted = psi * np.conj(r)
    h = np.cumsum(weighted, axis=-1) - weighted
    return np.real(np.sum(r * h, axis=-1)) + 0.5 * np.sum(psi * np.abs(r) ** 2, axis=-1)


def chi0(link, power):
    """Average nonlinear phase-rotation coefficient of the signal-noise terms [m^2].

    Diagnostic only: it does not enter the NSNI variance.
    """
    _, delta = depletion_exponents(link, power)
    _, psi = noise_accumulators(link, power, 0.0)
    a = np.exp(-delta[:-1]) * np.real(exp_integral(link.alpha, np.diff(link.z)))
    upstream = np.cumsum(psi * a) - psi * a
    return float(2 * np.sum(a * upstream + 0.5 * psi * a**2))
