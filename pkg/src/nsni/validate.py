"""Self-checks shared by the CLI ``validate`` subcommand and the test-suite."""

from __future__ import annotations

import copy
from dataclasses import replace

import numpy as np

from .closed_forms import (band_centers, dispersion_product, gating_pi, span_integrals,
                           span_pair_integrals)
from .coefficients import CoefficientKind, estimate_all, estimate_coefficient
from .link import (ChannelPlan, ConstellationSpec, build_link, constellation_moments,
                   depletion_exponents)
from .oracle import kernel_tensors, oracle_coefficient
from .units import beta2_to_dispersion


def _in_band(rng, n, plan, s=0, sp=0):
    """``n`` random frequency triples inside the (s, s') gate."""
    half = np.pi / plan.symbol_time
    c = band_centers(plan, s, sp)
    out = []
    while sum(len(o) for o in out) < n:
        w = c + rng.uniform(-half, half, size=(2 * n, 3))
        out.append(w[gating_pi(w, s, sp, plan) > 0])
    return np.concatenate(out)[:n]


def _panels(length, panels, nodes):
    x, v = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(0.0, length, panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    return ((a + b) / 2 + (b - a) / 2 * x).ravel(), ((b - a) / 2 * v).ravel(), edges


def _h(q, span_idx, link, delta, u):
    """Normalized kernel exp(-delta - alpha u + i q B(z0 + u)) at local positions u."""
    j = span_idx
    acc = link.acc_dispersion[j] + link.beta2[j] * u
    return np.exp(-delta[j] - link.alpha[j] * u + 1j * q[:, None] * acc)


def quadrature_r(q, span_idx, link, delta, panels=32, nodes=24):
    L = link.z[span_idx + 1] - link.z[span_idx]
    u, w, _ = _panels(L, panels, nodes)
    return _h(q, span_idx, link, delta, u) @ w


def integration_matrix(nodes):
    """S with (S f)_i = int_{-1}^{x_i} f for f sampled at the Gauss-Legendre nodes x.

    Exact for polynomials of degree < ``nodes``.
    """
    x, _ = np.polynomial.legendre.leggauss(nodes)
    vander = np.polynomial.legendre.legvander(x, nodes - 1)
    prim = np.empty_like(vander)
    for j in range(nodes):
        c = np.zeros(nodes)
        c[j] = 1.0
        prim[:, j] = np.polynomial.legendre.legval(
            x, np.polynomial.legendre.legint(c, lbnd=-1))
    return prim @ np.linalg.inv(vander)


def quadrature_I(q, qp, span_idx, link, delta, panels=32, nodes=24):
    """Nested z-quadrature of H_q(z) conj(H_q'(z')) over z' < z inside one span.

    The inner integral up to each outer node is the sum of the completed
    panels plus a spectral partial-panel integral on the same nodes.
    """
    L = link.z[span_idx + 1] - link.z[span_idx]
    u, w, _ = _panels(L, panels, nodes)
    inner_f = np.conj(_h(qp, span_idx, link, delta, u)).reshape(len(q), panels, nodes)
    panel_sums = (inner_f * w.reshape(panels, nodes)).sum(axis=-1)
    before = np.cumsum(panel_sums, axis=1) - panel_sums
    part = np.einsum("kn,qpn->qpk", integration_matrix(nodes) * (L / panels / 2), inner_f)
    inner = (before[..., None] + part).reshape(len(q), -1)
    return np.sum(_h(q, span_idx, link, delta, u) * inner * w, axis=1)


def check_closed_forms(link, plan, points=1000, seed=0, power=None, spans=None):
    """Worst relative errors of the span closed forms against quadrature.

    Returns a dict with ``r``, ``I`` and ``half`` (the Re I(w, w) = |r|^2 / 2
    identity), each maximized over spans and frequency points.
    """
    rng = np.random.default_rng(seed)
    power = plan.power if power is None else power
    delta = depletion_exponents(link, power)[1]
    spans = range(link.n_spans) if spans is None else spans
    worst = {"r": 0.0, "I": 0.0, "half": 0.0}
    for j in spans:
        w = _in_band(rng, points, plan)
        wp = _in_band(rng, points, plan)
        q, qp = dispersion_product(w), dispersion_product(wp)
        r_cf = span_integrals(q, link, delta)[:, j]
        r_q = quadrature_r(q, j, link, delta)
        worst["r"] = max(worst["r"], float(np.max(np.abs(r_cf - r_q) / np.abs(r_q))))
        i_cf = span_pair_integrals(q, qp, link, delta)[:, j]
        i_q = quadrature_I(q, qp, j, link, delta)
        worst["I"] = max(worst["I"], float(np.max(np.abs(i_cf - i_q) / np.abs(i_q))))
        i_diag = span_pair_integrals(q, q, link, delta)[:, j]
        half = 0.5 * np.abs(r_cf) ** 2
        worst["half"] = max(worst["half"], float(np.max(np.abs(i_diag.real - half) / half)))
    return worst


def toy_link(n_spans=1, n_channels=2):
    """Short low-dispersion link used by the oracle checks.

    ``n_spans`` x 10 km, beta2 = -1 ps^2/km, 10 GBd channels on a 12.5 GHz
    grid, gamma 1.3 /W/km, NF 5 dB, gain mode, 0 dBm.
    """
    plan = ChannelPlan.from_engineering(10.0, 12.5, n_channels, 0.0)
    link = build_link(n_spans, 10.0, 0.2, beta2_to_dispersion(-1e-27), 5.0,
                      gamma_per_w_km=1.3, plan=plan)
    return link, plan


def check_oracle_toy(kinds=("X1", "X3", "X1s[1,0,0]", "chi1", "chi1s[1,0,0]"), samples=1 << 16,
                     seed=0, trunc=32, n_spans=3):
    """MC coefficients against the extrapolated truncated-sum oracle.

    Passes when every kind has relative stderr <= 2 % and ``|z| <= 3``.
    """
    link, plan = toy_link(n_spans)
    cache, rows, ok = {}, {}, True
    for key in kinds:
        kind = CoefficientKind.from_key(key) if "[" in key else CoefficientKind(key)
        if kind.region not in cache:
            cache[kind.region] = kernel_tensors(link, plan, kind.region, trunc)
        ref = oracle_coefficient(kind, link, plan, trunc, tensors=cache[kind.region],
                                 extrapolate=True).value
        est = estimate_coefficient(kind, link, plan, samples=samples, seed=seed)
        z = (est.value - ref) / est.stderr
        rel = est.stderr / abs(ref)
        rows[kind.key] = {"mc": est.value, "oracle": ref, "rel_stderr": rel, "z": z}
        ok &= bool(abs(z) <= 3 and rel <= 0.02)
    return {"kinds": rows, "passed": ok}


def check_limits(link, plan, constellation, samples=1 << 14, seed=0):
    """Analytic limit identities on a frozen coefficient set.

    * Gaussian moments remove every format-dependent term from sigma_SS^2.
    * gamma = 0 gives SNR_U = SNR_C = 1 / sigma_ASE,DP^2.
    * n_sp = 0 gives sigma_NS^2 = sigma_ASE^2 = 0 with finite sigma_SS^2.
    * sigma_SS,DP^2, sigma_NS,DP^2 and sigma_ASE,DP^2 scale as P^2, P and
      1/P over 10 dB (gain mode).
    """
    from .variance import dual_pol_budget, sigma_ss_sq

    cs = estimate_all(link, plan, samples=samples, seed=seed)
    gauss = constellation_moments(ConstellationSpec.gaussian())
    ss_g = sigma_ss_sq(plan.power, cs, gauss, plan, link.gamma)
    # perturb every format-weighted coefficient; the Gaussian value must not move
    bumped = copy.deepcopy(cs)
    for key, est in bumped.estimates.items():
        if key.split("[")[0] in ("X2", "X3", "X4", "X5", "X3s"):
            bumped.estimates[key] = replace(est, value=est.value * 7.0 + 1e-3 * abs(ss_g))
    gauss_residual = abs(sigma_ss_sq(plan.power, bumped, gauss, plan, link.gamma) - ss_g) / ss_g

    lin = link.with_gamma(0.0)
    b = dual_pol_budget(plan.power, lin, plan, constellation, cs)
    ref = 1.0 / b.ase_dp
    gamma_zero = max(abs(b.snr_u - ref), abs(b.snr_c - ref)) / ref

    quiet = link.with_nsp(0.0)
    cs0 = estimate_all(quiet, plan, samples=samples, seed=seed)
    b0 = dual_pol_budget(plan.power, quiet, plan, constellation, cs0)
    nsp_zero = {"ns": b0.ns_dp, "ase": b0.ase_dp, "ss_finite": bool(np.isfinite(b0.ss_dp))}

    p = plan.power * np.array([1.0, 10.0])
    bs = [dual_pol_budget(x, link, plan.with_power(x), constellation, cs) for x in p]
    scaling = max(abs(bs[1].ss_dp / bs[0].ss_dp / 100.0 - 1),
                  abs(bs[1].ns_dp / bs[0].ns_dp / 10.0 - 1),
                  abs(bs[1].ase_dp / bs[0].ase_dp * 10.0 - 1))
    ok = (gauss_residual < 1e-12 and gamma_zero < 1e-12 and b0.ns_dp == 0 and b0.ase_dp == 0
          and nsp_zero["ss_finite"] and b0.ss_dp > 0 and scaling < 1e-12)
    return {"gaussian_residual": gauss_residual, "gamma_zero_residual": gamma_zero,
            "nsp_zero": nsp_zero, "scaling_residual": scaling, "passed": bool(ok)}
