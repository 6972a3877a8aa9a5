"""Variance budget and SNR assembly from a :class:`CoefficientSet`.

Two term-counting conventions are available:

``"exact"`` (default)
    multiplicities obtained by pairing every ordered FWM product with
    every other one, including the overlap between the (s, s') and
    (s', s) products and between the (0, s) and (s, 0) products. These
    match the brute-force paths in :mod:`nsni.oracle`.
``"simplified"``
    one multiplicity per distinct term, as in the usual compact
    closed-form expressions; kept for comparison.

The multiplicities differ only in the inter-channel terms::

                         exact                         simplified
    SS   NDFWM           2 X1ss per ordered pair       1
    SS-XP XPM            2 X1s                         1
    NS   XPM kurtosis    4 k chi3s                     1 k chi3s
    NS   NDFWM           2 (chi_s + chi_s' + chi_s+s')  1 (...)
    NS-XP XPM            2 chi1s + 4 chi1s'            3 chi1s

with ``k = mu4/mu2^2 - 2``. Single-polarization variances take the total
per-channel power ``P``; the dual-polarization budget applies
``gamma -> 8 gamma / 9`` and ``P -> P / 2`` per polarization, which gives
``(8/9)^2 (1/2)^2 = 16/81`` for the P^2 signal-signal terms and
``(8/9)^2 (1/2) = 32/81`` for the P^1 signal-noise terms (the ASE of both
polarizations referred to one polarization's power doubles).
"""

from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .coefficients import CoefficientKind, estimate_all
from .link import ConstellationSpec, ase_variance, constellation_moments, quantum_noise_variance
from .units import dbm2w, lin2db

logger = logging.getLogger(__name__)

CONVENTIONS = ("exact", "simplified")
SS_DP = 16.0 / 81.0
NS_DP = 32.0 / 81.0


class AssemblyError(KeyError):
    """A coefficient needed by the budget is missing from the set."""


def _moments(moments):
    """(mu4/mu2^2 - 2, mu6/mu2^3 - 9 mu4/mu2^2 + 12) from a spec or raw moments."""
    if isinstance(moments, ConstellationSpec):
        moments = constellation_moments(moments)
    mu2, mu4, mu6 = (float(m) for m in moments)
    k4 = mu4 / mu2**2
    return k4 - 2.0, mu6 / mu2**3 - 9.0 * k4 + 12.0


def _get(coeffs, tag, s=0, sp=0, noise=0):
    try:
        return coeffs.value(tag, s, sp, noise)
    except KeyError:
        raise AssemblyError(f"missing coefficient {CoefficientKind(tag, s, sp, noise).key}") from None


def _check(convention):
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")


def sigma_ss_sq(power, coeffs, moments, plan, gamma, convention="exact", ndfwm=True):
    """Single-polarization signal-signal variance, normalized to unit signal power."""
    _check(convention)
    k, k6 = _moments(moments)
    c = coeffs
    acc = (2 * _get(c, "X1") + k * (_get(c, "X2") + 4 * _get(c, "X3") + 4 * _get(c, "X4"))
           + k6 * _get(c, "X5"))
    for s in plan.interferers:
        acc += 4 * (_get(c, "X1s", s) + k * _get(c, "X3s", s))
    if ndfwm:
        mult = 2.0 if convention == "exact" else 1.0
        acc += mult * sum(_get(c, "X1ss", s, sp) for s, sp in plan.ndfwm_pairs())
    return gamma**2 * power**2 * acc


def sigma_ss_xp_sq(power, coeffs, moments, plan, gamma, convention="exact", ndfwm=True):
    """Variance of the |E_y|^2 E_x signal-signal products (single-pol normalization)."""
    _check(convention)
    k, _ = _moments(moments)
    c = coeffs
    acc = _get(c, "X1") + k * _get(c, "X3")
    mult = 2.0 if convention == "exact" else 1.0
    for s in plan.interferers:
        acc += mult * _get(c, "X1s", s) + k * _get(c, "X3s", s)
    if ndfwm:
        acc += sum(_get(c, "X1ss", s, sp) for s, sp in plan.ndfwm_pairs())
    return gamma**2 * power**2 * acc


def _ndfwm_chi(c, s, sp):
    return (_get(c, "chi1ss", s, sp, s) + _get(c, "chi1ss", s, sp, sp)
            + _get(c, "chi1ss", s, sp, s + sp))


def sigma_ns_sq(power, coeffs, link, plan, moments, convention="exact", ndfwm=True):
    """Single-polarization signal-noise variance, normalized to unit signal power."""
    _check(convention)
    k, _ = _moments(moments)
    c = coeffs
    acc = 6 * _get(c, "chi1") + k * (_get(c, "chi2") + 4 * _get(c, "chi3"))
    kurt = 4.0 if convention == "exact" else 1.0
    for s in plan.interferers:
        acc += 4 * (_get(c, "chi1s", s) + 2 * _get(c, "chi1s_p", s)) + kurt * k * _get(c, "chi3s", s)
    if ndfwm:
        mult = 2.0 if convention == "exact" else 1.0
        acc += mult * sum(_ndfwm_chi(c, s, sp) for s, sp in plan.ndfwm_pairs())
    return link.gamma**2 * quantum_noise_variance(link, plan) * power * acc


def sigma_ns_xp_sq(power, coeffs, link, plan, moments, convention="exact", ndfwm=True):
    """Variance of the |E_y|^2 E_x signal-noise products (single-pol normalization)."""
    _check(convention)
    k, _ = _moments(moments)
    c = coeffs
    acc = 3 * _get(c, "chi1") + k * _get(c, "chi3")
    for s in plan.interferers:
        if convention == "exact":
            acc += 2 * _get(c, "chi1s", s) + 4 * _get(c, "chi1s_p", s)
        else:
            acc += 3 * _get(c, "chi1s", s)
        acc += k * _get(c, "chi3s", s)
    if ndfwm:
        acc += sum(_ndfwm_chi(c, s, sp) for s, sp in plan.ndfwm_pairs())
    return link.gamma**2 * quantum_noise_variance(link, plan) * power * acc


@dataclass
class NoiseBudget:
    """Dual-polarization budget at one launch power; all variances ≥ 0 and dimensionless."""

    power: float
    ase_dp: float
    ss_dp: float
    ns_dp: float
    ase: float
    ss: float
    ss_xp: float
    ns: float
    ns_xp: float

    @property
    def snr_u(self):
        return 1.0 / (self.ase_dp + self.ss_dp + self.ns_dp)

    @property
    def snr_c(self):
        den = self.ase_dp + self.ns_dp
        return np.inf if den == 0 else 1.0 / den


def dual_pol_budget(power, link, plan, moments, coeffs, convention="exact", ndfwm=True):
    """Dual-polarization budget; ``power`` is the total per-channel power (both pols)."""
    g = link.gamma
    ss = sigma_ss_sq(power, coeffs, moments, plan, g, convention, ndfwm)
    ssx = sigma_ss_xp_sq(power, coeffs, moments, plan, g, convention, ndfwm)
    ns = sigma_ns_sq(power, coeffs, link, plan, moments, convention, ndfwm)
    nsx = sigma_ns_xp_sq(power, coeffs, link, plan, moments, convention, ndfwm)
    ase = ase_variance(link, plan.with_power(power))
    out = NoiseBudget(power, 2 * ase, SS_DP * (ss + ssx), NS_DP * (ns + nsx), ase, ss, ssx, ns, nsx)
    for name in ("ase_dp", "ss_dp", "ns_dp"):
        v = getattr(out, name)
        if not np.isfinite(v):
            raise FloatingPointError(f"non-finite {name} at P = {power} W")
        if v < 0:
            # MC noise can push a small sum of mixed-sign kinds below zero
            warnings.warn(f"{name} = {v:.3e} < 0 at P = {power} W", stacklevel=2)
    return out


@dataclass
class SnrCurve:
    powers_dbm: np.ndarray
    snr_u_db: np.ndarray
    snr_c_db: np.ndarray
    budgets: list = field(repr=False)
    opt_u: tuple = (np.nan, np.nan)  # (P dBm, SNR dB)
    opt_c: tuple = (np.nan, np.nan)
    flags: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def rows(self):
        for p, u, c, b in zip(self.powers_dbm, self.snr_u_db, self.snr_c_db, self.budgets):
            yield {"P_dBm": float(p), "snr_u_db": float(u), "snr_c_db": float(c),
                   "sigma2_ase": b.ase_dp, "sigma2_ss": b.ss_dp, "sigma2_ns": b.ns_dp}

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["P_dBm", "snr_u_db", "snr_c_db", "sigma2_ase",
                                               "sigma2_ss", "sigma2_ns"])
            w.writeheader()
            for row in self.rows():
                w.writerow({k: repr(v) for k, v in row.items()})

    def report(self):
        return {"rows": list(self.rows()),
                "optimum_u": {"P_dBm": self.opt_u[0], "snr_db": self.opt_u[1]},
                "optimum_c": {"P_dBm": self.opt_c[0], "snr_db": self.opt_c[1]},
                "flags": list(self.flags),
                "budgets": [asdict(b) for b in self.budgets],
                "provenance": self.provenance}

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(_jsonable(self.report()), fh, indent=2, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def refine_optimum(x, y):
    """Vertex of the parabola through the grid maximum and its two neighbours.

    Returns ``(x_opt, y_opt, interior)``; on an edge maximum the edge point
    is returned with ``interior=False``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    i = int(np.nanargmax(y))
    if i == 0 or i == len(y) - 1 or len(y) < 3:
        return x[i], y[i], False
    a, b, c = np.polyfit(x[i - 1:i + 2], y[i - 1:i + 2], 2)
    if a >= 0:
        return x[i], y[i], True
    xo = -b / (2 * a)
    return float(xo), float(np.polyval([a, b, c], xo)), True


def snr_curves(powers_dbm, link, plan, moments, coeffs=None, samples=1 << 16, seed=0,
               convention="exact", ndfwm=True, x4="zero", include_x2_x5=True):
    """Analytic SNR_U and SNR_C over a launch-power grid.

    In gain mode one coefficient set serves every power. In power mode the
    depletion exponents depend on P, so coefficients are re-estimated per
    grid point (``coeffs`` is then ignored).
    """
    powers_dbm = np.atleast_1d(np.asarray(powers_dbm, dtype=float))
    if powers_dbm.size == 0:
        raise ValueError("empty power grid")
    flags = []
    budgets = []
    prov = {"convention": convention, "ndfwm": bool(ndfwm), "mode": link.mode,
            "fingerprint": link.fingerprint(), "coefficients": []}

    def fresh(p):
        cs = estimate_all(link, plan.with_power(p), samples=samples, seed=seed, power=p, x4=x4,
                          include_x2_x5=include_x2_x5)
        prov["coefficients"].append(_provenance(cs))
        return cs

    if link.mode == "power" and coeffs is not None:
        flags.append("power mode: supplied coefficients ignored, re-estimated per power")
        coeffs = None
    if link.mode == "gain" and coeffs is None:
        coeffs = fresh(dbm2w(powers_dbm[0]))
    elif coeffs is not None:
        prov["coefficients"].append(_provenance(coeffs))
    for p_dbm in powers_dbm:
        p = float(dbm2w(p_dbm))
        cs = fresh(p) if link.mode == "power" else coeffs
        budgets.append(dual_pol_budget(p, link, plan, moments, cs, convention, ndfwm))
    u = np.array([lin2db(b.snr_u) for b in budgets])
    with np.errstate(divide="ignore"):
        c = np.array([lin2db(b.snr_c) if np.isfinite(b.snr_c) else np.inf for b in budgets])
    if all(a.nsp == 0 for a in link.amplifiers):
        flags.append("noiseless: compensated SNR unbounded")
    curve = SnrCurve(powers_dbm, u, c, budgets, flags=flags, provenance=prov)
    xo, yo, interior = refine_optimum(powers_dbm, u)
    curve.opt_u = (float(xo), float(yo))
    if not interior:
        msg = "SNR_U optimum on the grid edge"
        flags.append(msg)
        warnings.warn(msg, stacklevel=2)
    if np.all(np.isfinite(c)):
        xo, yo, interior = refine_optimum(powers_dbm, c)
        curve.opt_c = (float(xo), float(yo))
        if not interior:
            flags.append("SNR_C optimum on the grid edge")
    return curve


def _provenance(cs):
    return {"fingerprint": cs.fingerprint, "samples": cs.samples, "seed": cs.seed, "x4": cs.x4,
            "max_rel_stderr": max((e.stderr / abs(e.value) for e in cs.estimates.values()
                                   if e.value != 0), default=0.0)}
