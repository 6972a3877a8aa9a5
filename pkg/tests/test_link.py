import math
from decimal import Decimal, getcontext
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsni.link import (AmplifierSpec, ChannelPlan, ConstellationSpec, SpanSpec, ValidationError,
                       ase_variance, build_link, constellation_moments, depletion_exponents,
                       noise_accumulators, quantum_noise_variance)
from nsni.units import dispersion_to_beta2, nsp_from_nf

HBAR = 1.054571817e-34
C = 299792458.0


def test_beta2_from_dispersion():
    lam = Decimal("1550e-9")
    d = Decimal("16.5e-6")
    getcontext().prec = 40
    pi = Decimal("3.141592653589793238462643383279502884197")
    ref = -d * lam * lam / (2 * pi * Decimal(C))
    assert dispersion_to_beta2(16.5) == pytest.approx(float(ref), rel=1e-13)
    assert dispersion_to_beta2(16.5) == pytest.approx(-2.10e-26, rel=3e-3)


def test_config2_like_link_has_identical_spans():
    plan = ChannelPlan.from_engineering(49, 50, 1, 0.0)
    link = build_link(20, 100, 0.2, 16.5, 5, aeff_um2=80, plan=plan)
    assert link.n_spans == 20
    assert len(set(link.spans)) == 1
    assert link.z[0] == 0.0 and link.length == pytest.approx(2e6)
    assert link.gamma * 1e3 == pytest.approx(1.317, abs=2e-3)


def test_lossless_span():
    link = build_link(1, 50, 0.0, 16.5, 5, gamma_per_w_km=1.3)
    assert link.loss[0] == 0.0 and link.eta[0] == 1.0


@pytest.mark.parametrize("field,kwargs", [
    ("length", dict(length=-1.0, alpha=0.0, beta2=0.0, gamma=0.0)),
    ("alpha", dict(length=1.0, alpha=-1.0, beta2=0.0, gamma=0.0)),
    ("gamma", dict(length=1.0, alpha=0.0, beta2=0.0, gamma=-1.0)),
])
def test_span_validation_names_field(field, kwargs):
    with pytest.raises(ValidationError, match=field):
        SpanSpec(**kwargs)


def test_plan_validation():
    with pytest.raises(ValidationError, match="power"):
        ChannelPlan.from_engineering(49, 50, 1, -np.inf)
    with pytest.raises(ValidationError, match="channel overlap"):
        ChannelPlan.from_engineering(49, 40, 3, 0.0)


def test_low_nsp_warns_but_is_accepted():
    with pytest.warns(UserWarning, match="quantum limit"):
        AmplifierSpec(0.3)


def test_gain_mode_has_no_depletion():
    link = build_link(4, 100, 0.2, 16.5, 5, aeff_um2=80)
    d, delta = depletion_exponents(link, 1e-3)
    assert np.all(d == 0) and np.all(delta == 0)


def test_depletion_formula_against_decimal():
    getcontext().prec = 50
    zeta = 1e-3
    power = 1e-3
    nsp = nsp_from_nf(5.0)
    link = build_link(1, 100, 0.2, 16.5, 5, aeff_um2=80, mode="power")
    bw = zeta * power / (2 * link.photon_energy * nsp)
    link = link.replace(ase_bandwidth=bw)
    d, delta = depletion_exponents(link, power)
    # l = ln(100) exactly for 20 dB; d = ln((1 + 100 zeta) / (1 + zeta))
    ref = ((1 + 100 * Decimal(zeta)) / (1 + Decimal(zeta))).ln()
    assert d[0] == pytest.approx(float(ref), rel=1e-12)
    assert float(ref) == pytest.approx(math.log(1.1 / 1.001), rel=1e-15)
    assert delta[0] == 0.0 and delta[1] == d[0]


def test_noiseless_amplifier_has_no_depletion():
    link = build_link(3, 100, 0.2, 16.5, 5, aeff_um2=80, mode="power").with_nsp(0.0)
    d, _ = depletion_exponents(link, 1e-3)
    assert np.all(d == 0)


def test_depletion_rejects_nonpositive_power():
    link = build_link(1, 100, 0.2, 16.5, 5, aeff_um2=80, mode="power")
    with pytest.raises(ValueError):
        depletion_exponents(link, 0.0)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 12), p_dbm=st.floats(-20, 15), bw=st.floats(1e9, 1e12))
def test_delta_nondecreasing_in_power_mode(n, p_dbm, bw):
    link = build_link(n, 80, 0.22, 4.0, 6, aeff_um2=70, mode="power", ase_bandwidth=bw)
    d, delta = depletion_exponents(link, 1e-3 * 10 ** (p_dbm / 10))
    assert np.all(d >= 0)
    assert np.all(np.diff(delta) >= 0)
    assert np.all(d <= link.loss + 1e-15)


def test_noise_accumulators_log_gain_example():
    link = build_link(3, 100, 0.2, 16.5, 5, aeff_um2=80, noise_convention="log-gain")
    xi, psi = noise_accumulators(link, 1e-3)
    assert xi == pytest.approx(np.full(3, math.log(100) * 10**0.5 / 2), rel=1e-12)
    assert xi[0] == pytest.approx(7.281, abs=1e-3)
    assert psi[0] == 0.0
    assert psi[2] == pytest.approx(2 * xi[0])


def test_noise_accumulators_physical_convention():
    link = build_link(3, 100, 0.2, 16.5, 5, aeff_um2=80)
    xi, _ = noise_accumulators(link, 1e-3)
    assert xi == pytest.approx(np.full(3, 99 * nsp_from_nf(5)), rel=1e-12)


def test_noiseless_accumulators_vanish():
    link = build_link(3, 100, 0.2, 16.5, 5, aeff_um2=80).with_nsp(0.0)
    xi, psi = noise_accumulators(link, 1e-3)
    assert not xi.any() and not psi.any()
    assert ase_variance(link, ChannelPlan.from_engineering(49, 50, 1, 0.0)) == 0.0


def test_quantum_noise_variance():
    plan = ChannelPlan.from_engineering(49, 50, 1, 0.0)
    link = build_link(1, 100, 0.2, 16.5, 5, aeff_um2=80)
    ref = HBAR * 2 * math.pi * C / 1550e-9 * 49e9
    assert quantum_noise_variance(link, plan) == pytest.approx(ref, rel=1e-9)
    assert quantum_noise_variance(link, plan) == pytest.approx(6.28e-9, rel=2e-3)


def test_ase_variance_log_gain_example_and_monotone():
    plan = ChannelPlan.from_engineering(49, 50, 1, 0.0)
    link = build_link(20, 100, 0.2, 16.5, 5, aeff_um2=80, noise_convention="log-gain")
    ref = quantum_noise_variance(link, plan) / 1e-3 * 20 * math.log(100) * nsp_from_nf(5)
    assert ase_variance(link, plan) == pytest.approx(ref, rel=1e-12)
    values = [ase_variance(link, plan.with_power(p)) for p in (1e-4, 1e-3, 1e-2)]
    assert values[0] > values[1] > values[2]


def _exact_moments(points):
    pts = [Fraction(int(p.real)) ** 2 + Fraction(int(p.imag)) ** 2 for p in points]
    mu2 = sum(pts) / len(pts)
    mu4 = sum(x**2 for x in pts) / len(pts)
    mu6 = sum(x**3 for x in pts) / len(pts)
    return mu4 / mu2**2, mu6 / mu2**3


def test_moments_qpsk_gauss_16qam():
    assert constellation_moments(ConstellationSpec.by_name("qpsk")) == pytest.approx((1, 1, 1))
    assert constellation_moments(ConstellationSpec.gaussian()) == (1.0, 2.0, 6.0)
    levels = [-3, -1, 1, 3]
    raw = [complex(a, b) for a in levels for b in levels]
    k4, k6 = _exact_moments(raw)
    assert (k4, k6) == (Fraction(33, 25), Fraction(49, 25))
    mu = constellation_moments(ConstellationSpec.by_name("16qam"))
    assert mu == pytest.approx((1.0, float(k4), float(k6)), rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
                min_size=2, max_size=40))
def test_moments_invariants(raw):
    pts = np.array(raw)
    pts = pts - pts.mean()
    if np.mean(abs(pts) ** 2) < 1e-6:
        return
    mu2, mu4, mu6 = constellation_moments(ConstellationSpec("c", pts))
    assert mu2 == pytest.approx(1.0)
    assert mu4 >= 1.0 - 1e-9
    assert mu6 >= mu4**2 * (1 - 1e-9)


def test_constellation_errors():
    with pytest.raises(ValidationError, match="empty"):
        ConstellationSpec("e", np.array([]))
    with pytest.raises(ValidationError, match="zero mean"):
        ConstellationSpec("m", np.array([1.0, 2.0]))
    with pytest.raises(ValidationError):
        ConstellationSpec.by_name("nope")
