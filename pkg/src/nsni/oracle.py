"""Brute-force reference values from the truncated discrete-symbol sums.

These paths avoid everything the Monte Carlo engine relies on (delta-train
summation, Nyquist orthogonality, span closed forms). Per-span kernel
tensors ``x_j[m, n, p] = T * int_{span j} K_{m,n,p}(z) dz`` are built by
Gauss-Legendre quadrature in z, exact integration along w3 (the kernel
is a pure exponential in w3 at fixed z), and a 2-D FFT over (w1, w2) for
the symbol indices m and p. Only tiny links are practical.
"""

from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .link import (constellation_moments, depletion_exponents, noise_accumulators,
                   quantum_noise_variance)

logger = logging.getLogger(__name__)


@dataclass
class OracleResult:
    value: float
    tail: float  # outermost-shell contribution, or the extrapolation correction
    trunc: int


def _z_nodes(link, delta, nodes, sub):
    """GL nodes per span: (span index, z-weights, f(z), accumulated dispersion)."""
    x, v = np.polynomial.legendre.leggauss(nodes)
    out = []
    for j in range(link.n_spans):
        z0, z1 = link.z[j], link.z[j + 1]
        edges = np.linspace(z0, z1, sub + 1)
        zs = np.concatenate([(a + b) / 2 + (b - a) / 2 * x for a, b in zip(edges[:-1], edges[1:])])
        ws = np.concatenate([(b - a) / 2 * v for a, b in zip(edges[:-1], edges[1:])])
        f = np.exp(-delta[j] - link.alpha[j] * (zs - z0))
        acc = link.acc_dispersion[j] + link.beta2[j] * (zs - z0)
        out.append((ws * f, acc))
    return out


def kernel_tensors(link, plan, region, trunc, n_grid=None, nodes=16, sub=2, power=None):
    """Per-span kernel tensors for the FWM region ``(s, s')``.

    Returns an array of shape ``(n_spans, 2*trunc+1, 2*trunc+1, 2*trunc+1)``
    indexed ``[j, m + trunc, n + trunc, p + trunc]``.
    """
    s, sp = region
    T = plan.symbol_time
    h = np.pi / T
    M = int(trunc)
    N = n_grid or max(128, 2 * (2 * M + 1))
    c1, c2, c3 = plan.detuning(s), plan.detuning(s + sp), plan.detuning(sp)
    delta = depletion_exponents(link, plan.power if power is None else power)[1]
    u = -np.pi + (np.arange(N) + 0.5) * 2 * np.pi / N
    w1 = c1 + u[:, None] / T
    w2 = c2 + u[None, :] / T
    d = (w2 - w1)
    lo = np.maximum(c3 - h, d - h)
    hi = np.minimum(c3 + h, d + h)
    width = np.clip(hi - lo, 0.0, None)
    mid = (lo + hi) / 2
    zn = _z_nodes(link, delta, nodes, sub)
    idx = np.arange(-M, M + 1)
    # phase of the midpoint-grid DFT and of the band centers
    ph_m = np.exp(1j * idx * (c1 * T + (-np.pi + np.pi / N)))
    ph_p = np.exp(-1j * idx * (c2 * T + (-np.pi + np.pi / N)))
    pref = T**3 / (2 * np.pi) ** 3 * (2 * np.pi / (N * T)) ** 2 * N
    out = np.empty((link.n_spans, 2 * M + 1, 2 * M + 1, 2 * M + 1), dtype=complex)
    for j, (wf, acc) in enumerate(zn):
        base = wf[None, None, :] * np.exp(1j * acc[None, None, :] * (d * w2)[..., None])
        bd = acc[None, None, :] * d[..., None]
        for k, n in enumerate(idx):
            kappa = n * T - bd
            w3int = np.exp(1j * kappa * mid[..., None]) * width[..., None] * np.sinc(
                kappa * width[..., None] / (2 * np.pi))
            a = np.sum(base * w3int, axis=-1)
            g = np.fft.fft(np.fft.ifft(a, axis=0), axis=1)
            g = g[np.ix_(idx % N, idx % N)]
            out[j, :, k, :] = pref * ph_m[:, None] * ph_p[None, :] * g
    return out


def _pattern_sum(xa, xb, pattern):
    """sum over the index pattern of xa * conj(xb) (tensors indexed [m, n, p])."""
    if pattern == "mnp":
        return np.vdot(xb, xa)
    if pattern == "mmn":  # X_{m,m,n}
        a = np.einsum("mmp->mp", xa)
        b = np.einsum("mmp->mp", xb)
        return np.vdot(b, a)
    if pattern == "mnn":  # X_{m,n,n}
        a = np.einsum("mnn->mn", xa)
        b = np.einsum("mnn->mn", xb)
        return np.vdot(b, a)
    if pattern == "mmm":
        a = np.einsum("mmm->m", xa)
        b = np.einsum("mmm->m", xb)
        return np.vdot(b, a)
    if pattern == "x4":  # X_{m,n,n} X*_{m,m,m}
        a = np.einsum("mnn->mn", xa)
        b = np.einsum("mmm->m", xb)
        return np.sum(a * np.conj(b)[:, None])
    raise ValueError(pattern)


_PATTERN = {"X1": "mnp", "X1s": "mnp", "X1ss": "mnp", "X2": "mmn", "X3": "mnn", "X3s": "mnn",
            "X4": "x4", "X5": "mmm", "chi1": "mnp", "chi1s": "mnp", "chi1s_p": "mnp",
            "chi1ss": "mnp", "chi2": "mmn", "chi3": "mnn", "chi3s": "mnn"}


def _shell_mask(trunc):
    idx = np.arange(-trunc, trunc + 1)
    return (np.abs(idx)[:, None, None] == trunc) | (np.abs(idx)[None, :, None] == trunc) | \
        (np.abs(idx)[None, None, :] == trunc)


def oracle_coefficient(kind, link, plan, trunc=32, tensors=None, power=None, extrapolate=False,
                       **grid):
    """Coefficient from its truncated discrete-sum definition.

    The sinc-pulse kernels decay slowly, so the truncated sum converges
    like ``v(M) = v_inf - c / M``. With ``extrapolate=True`` the value is
    Richardson-extrapolated from ``trunc`` and ``3 * trunc // 4`` and
    ``tail`` holds the size of the correction.
    """
    from .coefficients import CoefficientKind
    if isinstance(kind, str):
        kind = CoefficientKind(kind)
    if trunc < 8:
        warnings.warn(f"trunc={trunc} < 8: truncation tails dominate", stacklevel=2)
    power = plan.power if power is None else power
    x = tensors if tensors is not None else kernel_tensors(link, plan, kind.region, trunc,
                                                           power=power, **grid)
    if extrapolate:
        coarse = 3 * trunc // 4
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fine = oracle_coefficient(kind, link, plan, trunc, tensors=x, power=power).value
            rough = oracle_coefficient(kind, link, plan, coarse, tensors=x, power=power).value
        val = (trunc * fine - coarse * rough) / (trunc - coarse)
        return OracleResult(float(val), float(abs(val - fine)), trunc)
    M = (x.shape[1] - 1) // 2
    if M != trunc:
        c = M - trunc
        x = x[:, c:M + trunc + 1, c:M + trunc + 1, c:M + trunc + 1]
    pattern = _PATTERN[kind.tag]
    shell = _shell_mask(trunc)
    if kind.is_chi:
        psi = noise_accumulators(link, power, plan.detuning(kind.noise_channel))[1]
        val = tail = 0.0
        for j, jp in itertools.product(range(link.n_spans), repeat=2):
            wgt = psi[min(j, jp)]
            if wgt == 0:
                continue
            val += wgt * np.real(_pattern_sum(x[j], x[jp], pattern))
            tail += wgt * np.real(_pattern_sum(x[j] * shell, x[jp] * shell, pattern))
        return OracleResult(float(val), float(abs(tail)), trunc)
    xs = x.sum(axis=0)
    val = np.real(_pattern_sum(xs, xs, pattern))
    tail = np.real(_pattern_sum(xs * shell, xs * shell, pattern))
    return OracleResult(float(val), float(abs(tail)), trunc)


# ---------------------------------------------------------------------------
# Signal-noise variance from the symbol/noise moment expansion


@dataclass(frozen=True)
class _Factor:
    chan: int
    pol: str
    conj: bool
    axis: int  # 0 -> m, 1 -> n, 2 -> p


def _regions(plan):
    chans = set(plan.channels)
    return [(c1, c3) for c1 in plan.channels for c3 in plan.channels if c1 + c3 in chans]


def _terms(plan, cross_pol):
    """Signal-noise terms as (region, factors, noise position)."""
    pols = ("x", "y", "y") if cross_pol else ("x", "x", "x")
    out = []
    for c1, c3 in _regions(plan):
        facs = (_Factor(c1, pols[0], False, 0), _Factor(c3, pols[1], False, 1),
                _Factor(c1 + c3, pols[2], True, 2))
        for k in range(3):
            out.append(((c1, c3), facs, k))
    return out


def _contract(xa, xb, axes_pairs, quad_axes=None):
    """sum over indices of xa[...] conj(xb[...]) with paired axes identified."""
    letters_a = ["i", "j", "k"]
    letters_b = ["l", "m", "n"]
    for a, b in axes_pairs:
        letters_b[b] = letters_a[a]
    if quad_axes is not None:
        # all four symbol axes share one index
        (a1, a2), (b1, b2) = quad_axes
        letters_a[a2] = letters_a[a1]
        letters_b[b1] = letters_a[a1]
        letters_b[b2] = letters_a[a1]
        # the noise axis pairing must still hold
        for a, b in axes_pairs:
            letters_b[b] = letters_a[a]
    spec = "".join(letters_a) + "," + "".join(letters_b) + "->"
    return np.einsum(spec, xa, np.conj(xb), optimize=True)


def _slice(x, trunc):
    M = (x.shape[-1] - 1) // 2
    c = M - trunc
    if c < 0:
        raise ValueError(f"tensors hold trunc={M} < requested {trunc}")
    return x[..., c:M + trunc + 1, c:M + trunc + 1, c:M + trunc + 1]


def oracle_sigma_ns(link, plan, constellation, trunc=16, cross_pol=False, cross_terms=True,
                    power=None, tensors=None, extrapolate=False, **grid):
    """Signal-noise variance from the truncated symbol sums.

    Expands every first-order-in-noise FWM product, takes the expectation
    over i.i.d. symbols (second moment 1, fourth moment ``mu4``) and the
    per-span ASE coefficients, and drops the pairings internal to one
    product (the average nonlinear phase rotation). With
    ``cross_terms=False`` only identical products are correlated, which
    omits the (s, s') / (s', s) overlap of the non-degenerate terms.

    ``cross_pol=True`` evaluates the |E_y|^2 E_x products instead.
    Returns the single-polarization-normalized value
    gamma^2 sigma_qn^2 P * (moment sum).
    """
    power = plan.power if power is None else power
    _, mu4, _ = constellation_moments(constellation)
    kappa4 = mu4 - 2.0
    if tensors is None:
        tensors = {r: kernel_tensors(link, plan, r, trunc, power=power, **grid)
                   for r in _regions(plan)}
    if extrapolate:
        coarse = 3 * trunc // 4
        kw = dict(cross_pol=cross_pol, cross_terms=cross_terms, power=power)
        fine = oracle_sigma_ns(link, plan, constellation, trunc, tensors=tensors, **kw)
        rough = oracle_sigma_ns(link, plan, constellation, coarse, tensors=tensors, **kw)
        return (trunc * fine - coarse * rough) / (trunc - coarse)
    tensors = {r: _slice(t, trunc) for r, t in tensors.items()}
    psi_by_chan = {c: noise_accumulators(link, power, plan.detuning(c))[1] for c in plan.channels}
    terms = _terms(plan, cross_pol)
    total = 0.0
    nsp = link.n_spans
    for (ra, fa, ka), (rb, fb, kb) in itertools.product(terms, repeat=2):
        if not cross_terms and (ra, ka) != (rb, kb):
            continue
        na, nb = fa[ka], fb[kb]
        if (na.chan, na.pol, na.conj) != (nb.chan, nb.pol, nb.conj):
            continue
        sa = [f for i, f in enumerate(fa) if i != ka]
        sb = [f for i, f in enumerate(fb) if i != kb]
        noise_pair = [(na.axis, nb.axis)]
        contribs = []
        for perm in ((0, 1), (1, 0)):
            pairs = [(sa[0], sb[perm[0]]), (sa[1], sb[perm[1]])]
            if all((p.chan, p.pol, p.conj) == (q.chan, q.pol, q.conj) for p, q in pairs):
                contribs.append((1.0, noise_pair + [(p.axis, q.axis) for p, q in pairs], None))
        # fourth cumulant: all four symbol factors in one channel/pol (the
        # conjugation balance follows from the matched noise factors)
        if (sa[0].chan, sa[0].pol) == (sa[1].chan, sa[1].pol) == (sb[0].chan, sb[0].pol) \
                == (sb[1].chan, sb[1].pol) and kappa4 != 0.0:
            contribs.append((kappa4, noise_pair, ((sa[0].axis, sa[1].axis), (sb[0].axis, sb[1].axis))))
        if not contribs:
            continue
        psi = psi_by_chan[na.chan]
        xa_all, xb_all = tensors[ra], tensors[rb]
        for j, jp in itertools.product(range(nsp), repeat=2):
            wgt = psi[min(j, jp)]
            if wgt == 0:
                continue
            for coef, pairs, quad in contribs:
                total += wgt * coef * np.real(_contract(xa_all[j], xb_all[jp], pairs, quad))
    gamma = link.gamma
    return gamma**2 * quantum_noise_variance(link, plan) * power * float(total)


def oracle_sigma_ss_gaussian(link, plan, trunc=12, realizations=4000, seed=0, cross_pol=False,
                             power=None, tensors=None, batch=500, **grid):
    """Signal-signal variance by direct simulation of the discrete-symbol model.

    Draws circular Gaussian symbols, evaluates every ordered FWM product of
    the truncated kernels, removes the part linear in the symbols (the
    average phase rotation and its truncation residue) and returns
    ``(variance, stderr)`` normalized like :func:`nsni.variance.sigma_ss_sq`.
    """
    power = plan.power if power is None else power
    regions = _regions(plan)
    if tensors is None:
        tensors = {r: kernel_tensors(link, plan, r, trunc, power=power, **grid) for r in regions}
    xs = {r: t.sum(axis=0) for r, t in tensors.items()}
    M = (next(iter(xs.values())).shape[0] - 1) // 2
    K = 2 * M + 1
    rng = np.random.default_rng(seed)
    chans = plan.channels
    vals = []
    for start in range(0, realizations, batch):
        nb = min(batch, realizations - start)

        def draw():
            return {c: (rng.standard_normal((nb, K)) + 1j * rng.standard_normal((nb, K))) / np.sqrt(2)
                    for c in chans}
        ax = draw()
        ay = draw() if cross_pol else ax
        b = np.zeros(nb, dtype=complex)
        for (c1, c3), x in xs.items():
            c2 = c1 + c3
            t = np.einsum("mnp,rp->rmn", x, np.conj(ay[c2]), optimize=True)
            b += np.einsum("rmn,rm,rn->r", t, ax[c1], ay[c3], optimize=True)
            # linear part: pairings of the conjugated factor with a same-field factor
            if c2 == c3:
                b -= np.einsum("mnn,rm->r", x, ax[c1])
            if c2 == c1 and not cross_pol:
                b -= np.einsum("mnm,rn->r", x, ay[c3])
        vals.append(np.abs(b) ** 2)
    v = np.concatenate(vals)
    scale = link.gamma**2 * power**2
    return scale * float(v.mean()), scale * float(v.std(ddof=1) / np.sqrt(v.size))
