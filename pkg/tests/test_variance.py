import csv
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nsni.coefficients import estimate_all
from nsni.link import ChannelPlan, ConstellationSpec, build_link
from nsni.validate import check_limits
from nsni.variance import (AssemblyError, dual_pol_budget, refine_optimum, sigma_ns_sq,
                           sigma_ss_sq, snr_curves)

QAM16 = ConstellationSpec.by_name("16qam")


@pytest.fixture(scope="module")
def one_ch():
    plan = ChannelPlan.from_engineering(49, 50, 1, 0.0)
    link = build_link(5, 100, 0.2, 16.5, 5, aeff_um2=80, plan=plan)
    return link, plan, estimate_all(link, plan, samples=1 << 14)


@pytest.fixture(scope="module")
def three_ch():
    plan = ChannelPlan.from_engineering(49, 50, 3, 0.0)
    link = build_link(5, 100, 0.2, 16.5, 5, aeff_um2=80, plan=plan)
    return link, plan, estimate_all(link, plan, samples=1 << 14)


def test_conventions_agree_for_one_channel(one_ch):
    link, plan, cs = one_ch
    a = dual_pol_budget(plan.power, link, plan, QAM16, cs, "exact")
    b = dual_pol_budget(plan.power, link, plan, QAM16, cs, "simplified")
    assert (a.ss_dp, a.ns_dp) == (b.ss_dp, b.ns_dp)


def test_conventions_differ_with_neighbours(three_ch):
    link, plan, cs = three_ch
    a = sigma_ss_sq(plan.power, cs, QAM16, plan, link.gamma, "exact")
    b = sigma_ss_sq(plan.power, cs, QAM16, plan, link.gamma, "simplified")
    assert a > b


def test_unknown_convention(one_ch):
    link, plan, cs = one_ch
    with pytest.raises(ValueError, match="convention"):
        sigma_ss_sq(plan.power, cs, QAM16, plan, link.gamma, "other")


def test_missing_coefficient_is_reported(three_ch):
    link, plan, cs = three_ch
    partial = estimate_all(link, plan, samples=2048, kinds=[])
    with pytest.raises(AssemblyError, match="X1"):
        sigma_ss_sq(plan.power, partial, QAM16, plan, link.gamma)
    with pytest.raises(AssemblyError, match="chi1"):
        sigma_ns_sq(plan.power, partial, link, plan, QAM16)


def test_limits_and_scaling(three_ch):
    link, plan, _ = three_ch
    res = check_limits(link, plan, QAM16, samples=4096)
    assert res["gaussian_residual"] < 1e-12
    assert res["gamma_zero_residual"] < 1e-12
    assert res["nsp_zero"] == {"ns": 0.0, "ase": 0.0, "ss_finite": True}
    assert res["scaling_residual"] < 1e-12
    assert res["passed"]


def test_ndfwm_ablation_raises_snr(three_ch):
    link, plan, cs = three_ch
    on = dual_pol_budget(plan.power, link, plan, QAM16, cs, ndfwm=True)
    off = dual_pol_budget(plan.power, link, plan, QAM16, cs, ndfwm=False)
    assert off.snr_u > on.snr_u
    assert off.snr_c >= on.snr_c


def test_snr_curve_is_unimodal_and_exports(one_ch, tmp_path):
    link, plan, cs = one_ch
    curve = snr_curves(np.arange(-4, 7, 1.0), link, plan, QAM16, coeffs=cs)
    u = curve.snr_u_db
    k = int(np.argmax(u))
    assert 0 < k < len(u) - 1
    assert np.all(np.diff(u[:k + 1]) > 0) and np.all(np.diff(u[k:]) < 0)
    assert np.all(curve.snr_c_db >= u - 1e-12)
    curve.to_csv(tmp_path / "s.csv")
    rows = list(csv.DictReader(open(tmp_path / "s.csv")))
    assert len(rows) == 11 and float(rows[0]["P_dBm"]) == -4.0
    curve.to_json(tmp_path / "s.json")
    assert json.load(open(tmp_path / "s.json"))["optimum_u"]["P_dBm"] == curve.opt_u[0]


def test_edge_optimum_is_flagged(one_ch):
    link, plan, cs = one_ch
    with pytest.warns(UserWarning, match="edge"):
        curve = snr_curves([-10.0, -9.0, -8.0], link, plan, QAM16, coeffs=cs)
    assert any("edge" in f for f in curve.flags)


def test_noiseless_flag(one_ch):
    link, plan, _ = one_ch
    quiet = link.with_nsp(0.0)
    # without ASE the uncompensated SNR only falls with power
    with pytest.warns(UserWarning, match="edge"):
        curve = snr_curves([0.0, 2.0, 4.0, 6.0], quiet, plan, QAM16, samples=2048)
    assert np.all(np.isinf(curve.snr_c_db))
    assert "noiseless: compensated SNR unbounded" in curve.flags


def test_empty_power_grid(one_ch):
    link, plan, cs = one_ch
    with pytest.raises(ValueError, match="empty"):
        snr_curves([], link, plan, QAM16, coeffs=cs)


@given(a=st.floats(0.05, 5), x0=st.floats(-3, 3), c=st.floats(-10, 10))
def test_refine_optimum_recovers_parabola_vertex(a, x0, c):
    x = np.linspace(-5, 5, 11)
    y = -a * (x - x0) ** 2 + c
    xo, yo, interior = refine_optimum(x, y)
    assert interior
    assert xo == pytest.approx(x0, abs=1e-8)
    assert yo == pytest.approx(c, abs=1e-8)
