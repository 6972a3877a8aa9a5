import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from nsni.closed_forms import (assemble_R, assemble_R_diag, band_centers, dispersion_product,
                               exp_integral, gating_pi, nested_integral, span_pair_I, span_r)
from nsni.link import ChannelPlan, build_link, noise_accumulators
from nsni.validate import _in_band, check_closed_forms


def _cquad(f, a, b):
    re = quad(lambda u: f(u).real, a, b, epsabs=1e-15, epsrel=1e-12, limit=400)[0]
    im = quad(lambda u: f(u).imag, a, b, epsabs=1e-15, epsrel=1e-12, limit=400)[0]
    return re + 1j * im


# the reference quadrature may flag roundoff on integrands that are tiny in one part
pytestmark = pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")

finite = dict(allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(re=st.floats(0, 5, **finite), im=st.floats(-50, 50, **finite))
def test_exp_integral_matches_quadrature(re, im):
    x = re + 1j * im
    ref = _cquad(lambda u: np.exp(-x * u), 0.0, 1.0)
    assert abs(exp_integral(x, 1.0) - ref) <= 1e-11 * max(abs(ref), 1e-3)


@settings(max_examples=30, deadline=None)
@given(br=st.floats(0, 3, **finite), bi=st.floats(-20, 20, **finite),
       cr=st.floats(0, 3, **finite), ci=st.floats(-20, 20, **finite))
def test_nested_integral_matches_quadrature(br, bi, cr, ci):
    b, c = br + 1j * bi, cr + 1j * ci
    inner = lambda u: exp_integral(b, u)  # noqa: E731
    ref = _cquad(lambda u: np.exp(-c * u) * inner(u), 0.0, 1.0)
    assert abs(nested_integral(b, c, 1.0) - ref) <= 1e-10 * max(abs(ref), 1e-3)


def test_series_branches_are_continuous():
    for x in (1e-6, 9.9e-4, 1.01e-3):
        ref = -np.expm1(-x) / x
        assert exp_integral(x, 1.0) == pytest.approx(ref, rel=1e-14)
    b = np.array([0.0199, 0.0201]) * (1 + 0.3j)
    v = nested_integral(b, 0.5 * b, 1.0)
    ref = [_cquad(lambda u, bb=bb: np.exp(-0.5 * bb * u) * exp_integral(bb, u), 0, 1) for bb in b]
    assert v == pytest.approx(np.array(ref), rel=1e-12)


def test_gate_is_binary_and_respects_bands():
    plan = ChannelPlan.from_engineering(10, 12.5, 3, 0.0)
    rng = np.random.default_rng(1)
    w = rng.uniform(-3e11, 3e11, size=(5000, 3))
    g = gating_pi(w, 1, -1, plan)
    assert set(np.unique(g)) <= {0.0, plan.symbol_time**2}
    inside = _in_band(rng, 200, plan, 1, -1)
    assert np.all(gating_pi(inside, 1, -1, plan) > 0)
    assert np.allclose(band_centers(plan, 1, -1), [plan.spacing, 0.0, -plan.spacing])


def test_dispersion_product_vanishes_on_degenerate_triples():
    w = np.array([[1.0, 1.0, 5.0], [2.0, 3.0, 3.0]])
    assert np.all(dispersion_product(w) == 0)


def test_closed_forms_against_quadrature_small_link():
    plan = ChannelPlan.from_engineering(49, 50, 1, 0.0)
    link = build_link(2, 80, 0.2, 16.5, 5, aeff_um2=80, plan=plan, mode="power")
    res = check_closed_forms(link, plan, points=200)
    assert res["r"] < 1e-9 and res["I"] < 1e-8 and res["half"] < 1e-12


def test_assemble_R_diag_consistent_with_general_form():
    plan = ChannelPlan.from_engineering(49, 50, 1, 0.0)
    link = build_link(4, 100, 0.2, 16.5, 5, aeff_um2=80, plan=plan)
    w = _in_band(np.random.default_rng(0), 50, plan)
    r = span_r(w, 0, 0, link, plan)
    pair = span_pair_I(w, w, 0, 0, link, plan)
    _, psi = noise_accumulators(link, plan.power)
    general = assemble_R(r, r, pair, psi)
    assert np.real(general) == pytest.approx(assemble_R_diag(r, psi), rel=1e-11)


def test_single_span_R_vanishes():
    plan = ChannelPlan.from_engineering(49, 50, 1, 0.0)
    link = build_link(1, 100, 0.2, 16.5, 5, aeff_um2=80, plan=plan)
    w = _in_band(np.random.default_rng(0), 20, plan)
    _, psi = noise_accumulators(link, plan.power)
    assert np.all(assemble_R_diag(span_r(w, 0, 0, link, plan), psi) == 0)
