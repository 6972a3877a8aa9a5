import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nsni.coefficients import (CHI_KINDS, KINDS, CoefficientKind, CoefficientSet,
                               estimate_all, estimate_coefficient, required_kinds)
from nsni.link import ChannelPlan, build_link


@pytest.fixture(scope="module")
def small():
    plan = ChannelPlan.from_engineering(49, 50, 3, 0.0)
    link = build_link(3, 100, 0.2, 16.5, 5, aeff_um2=80, plan=plan)
    return link, plan


@given(tag=st.sampled_from(KINDS), s=st.integers(-3, 3), sp=st.integers(-3, 3),
       q=st.integers(-3, 3))
def test_key_round_trip(tag, s, sp, q):
    try:
        kind = CoefficientKind(tag, s, sp, q)
    except ValueError:
        return
    assert CoefficientKind.from_key(kind.key).key == kind.key


@pytest.mark.parametrize("args", [("X9",), ("X1s", 0), ("X1ss", 1, 0), ("chi1ss", 0, 2)])
def test_invalid_kinds(args):
    with pytest.raises(ValueError):
        CoefficientKind(*args)


def test_reproducible_and_seed_dependent(small):
    link, plan = small
    a = estimate_coefficient("X1", link, plan, samples=4096, seed=3)
    b = estimate_coefficient("X1", link, plan, samples=4096, seed=3)
    c = estimate_coefficient("X1", link, plan, samples=4096, seed=4)
    assert a == b
    assert a.value != c.value
    assert abs(a.value - c.value) < 5 * np.hypot(a.stderr, c.stderr)


def test_stderr_shrinks_like_inverse_sqrt(small):
    link, plan = small
    lo = estimate_coefficient("X1", link, plan, samples=1 << 12, seed=1)
    hi = estimate_coefficient("X1", link, plan, samples=1 << 16, seed=1)
    assert hi.stderr / abs(hi.value) == pytest.approx(lo.stderr / abs(lo.value) / 4, rel=0.3)


def test_too_few_samples(small):
    with pytest.raises(ValueError):
        estimate_coefficient("X1", *small, samples=10)


def test_chi_vanishes_on_one_span():
    plan = ChannelPlan.from_engineering(49, 50, 1, 0.0)
    link = build_link(1, 100, 0.2, 16.5, 5, aeff_um2=80, plan=plan)
    for tag in ("chi1", "chi2", "chi3"):
        assert estimate_coefficient(tag, link, plan, samples=2048).value == 0.0


def test_positive_gn_kernels(small):
    link, plan = small
    for kind in ("X1", CoefficientKind("X1s", 1), CoefficientKind("X1ss", 1, -1), "chi1"):
        assert estimate_coefficient(kind, link, plan, samples=4096).value > 0


def test_gain_mode_coefficients_do_not_depend_on_power(small):
    link, plan = small
    a = estimate_coefficient("X1", link, plan, samples=2048, power=1e-4)
    b = estimate_coefficient("X1", link, plan, samples=2048, power=1e-2)
    assert a.value == b.value


def test_power_mode_coefficients_shrink_with_depletion():
    plan = ChannelPlan.from_engineering(49, 50, 1, 0.0)
    link = build_link(10, 120, 0.22, 3.8, 5, aeff_um2=70.26, plan=plan, mode="power")
    lo = estimate_coefficient("X1", link, plan, samples=4096, power=1e-6)
    hi = estimate_coefficient("X1", link, plan, samples=4096, power=1e-2)
    assert lo.value < hi.value


def test_estimate_all_complete_and_serializable(small, tmp_path):
    link, plan = small
    cs = estimate_all(link, plan, samples=2048)
    cs.check_complete(plan)
    assert cs.value("X4") == 0.0
    # flat ASE: the noise-channel variants share one estimate
    assert cs.value("chi1s_p", 1) == cs.value("chi1s", 1)
    path = tmp_path / "c.json"
    cs.save(path)
    back = CoefficientSet.load(path)
    assert back == cs
    cs.estimates.pop("X1[0,0,0]")
    with pytest.raises(KeyError, match="X1"):
        cs.check_complete(plan)


def test_required_kinds_cover_plan(small):
    _, plan = small
    keys = {k.key for k in required_kinds(plan)}
    assert {"X1s[-1,0,0]", "X1s[1,0,0]", "X1ss[1,-1,0]", "X1ss[-1,1,0]"} <= keys
    assert all(k.split("[")[0] in KINDS for k in keys)
    assert any(k.startswith(CHI_KINDS) for k in keys)
