import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icewave.errors import ConditionFailedError, DomainError
from icewave.laminar import (
    PhysicalParams,
    build_laminar,
    check_existence,
    cond2_value,
    depth_integral,
    solve_theta,
    to_csv,
)
from icewave.vorticity import VorticityProfile, eval_Gamma


class TestDepthIntegral:
    def test_zero_closed_form(self, profile_zero):
        assert depth_integral(profile_zero, 4.0) == pytest.approx(1.0, abs=1e-12)
        assert depth_integral(profile_zero, 16.0) == pytest.approx(0.5, abs=1e-12)

    def test_constant_closed_form(self, profile_const):
        # (1/gamma0) (sqrt(theta) - sqrt(theta - 2 gamma0 |p0|)) = 2.5 - 1.5
        assert depth_integral(profile_const, 6.25) == pytest.approx(1.0, abs=1e-10)

    def test_singular_theta_rejected(self, profile_const):
        with pytest.raises(DomainError):
            depth_integral(profile_const, 2.0 * 2.0)  # = 2 max Gamma

    @given(
        theta=st.floats(min_value=4.2, max_value=50.0),
        gap=st.floats(min_value=0.05, max_value=3.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_strictly_decreasing(self, profile_const, theta, gap):
        d1 = depth_integral(profile_const, theta)
        d2 = depth_integral(profile_const, theta + gap)
        assert d1 > d2


class TestCheckExistence:
    def test_zero_always_exists(self, profile_zero):
        ok, limit = check_existence(profile_zero, 100.0)
        assert ok and np.isinf(limit)

    def test_negative_constant_limit(self):
        prof = VorticityProfile.constant(-1.0, -2.0)
        ok, limit = check_existence(prof, 3.0)
        assert not ok
        assert limit == pytest.approx(2.0, abs=1e-3)
        ok, limit = check_existence(prof, 1.0)
        assert ok
        assert limit == pytest.approx(2.0, abs=1e-3)


class TestSolveTheta:
    def test_zero(self, profile_zero, params):
        assert solve_theta(profile_zero, params) == pytest.approx(4.0, abs=1e-12)

    def test_constant(self, profile_const, params):
        assert solve_theta(profile_const, params) == pytest.approx(6.25, abs=1e-10)

    def test_condition_failed_carries_limit(self):
        prof = VorticityProfile.constant(-1.0, -2.0)
        params = PhysicalParams(g=1.0, d=3.0, p0=-2.0, alpha=0.5)
        with pytest.raises(ConditionFailedError) as exc:
            solve_theta(prof, params)
        assert exc.value.value == pytest.approx(2.0, abs=1e-3)

    def test_depth_recovered(self, all_flows, params):
        for flow in all_flows.values():
            d = depth_integral(flow.profile, flow.theta)
            assert d == pytest.approx(params.d, rel=1e-9)

    def test_p0_mismatch_rejected(self, params):
        with pytest.raises(DomainError):
            solve_theta(VorticityProfile.zero(-1.0), params)


class TestBuildLaminar:
    def test_zero_closed_form(self, flow_zero):
        assert np.allclose(flow_zero.a, 2.0, atol=1e-12)
        assert np.allclose(flow_zero.H, flow_zero.p / 2.0, atol=1e-11)

    def test_constant_closed_form(self, flow_const):
        a_exact = np.sqrt(6.25 - 2.0 * (flow_const.p + 2.0))
        assert np.allclose(flow_const.a, a_exact, atol=1e-12)
        assert np.allclose(flow_const.H, 1.5 - a_exact, atol=1e-10)

    def test_boundary_conditions(self, all_flows, params):
        for flow in all_flows.values():
            assert flow.H[0] == pytest.approx(-params.d, abs=1e-10)
            assert flow.H[-1] == 0.0
            assert np.all(np.diff(flow.H) > 0.0)

    def test_a_squared_identity(self, all_flows):
        for flow in all_flows.values():
            gam = np.asarray(eval_Gamma(flow.profile, flow.p), dtype=float)
            assert np.allclose(flow.a**2 + 2.0 * gam - flow.theta, 0.0, atol=1e-11)

    def test_extrema_fields(self, flow_const):
        assert flow_const.a_min == flow_const.a.min() == flow_const.a[-1]
        assert flow_const.a_max == flow_const.a.max() == flow_const.a[0]

    def test_Hp_times_a_is_one(self, all_flows):
        for flow in all_flows.values():
            assert np.allclose(flow.Hp_of(flow.p) * flow.a, 1.0, atol=1e-13)

    def test_conserved_ode_form(self, flow_tab):
        # (1/H'^2 + 2 Gamma)' = 0: via finite differences on the H samples.
        p, H = flow_tab.p, flow_tab.H
        dp = p[1] - p[0]
        Hp = (H[2:] - H[:-2]) / (2.0 * dp)
        inv = 1.0 / Hp**2 + 2.0 * np.asarray(eval_Gamma(flow_tab.profile, p[1:-1]))
        dinv = np.diff(inv) / dp
        assert np.max(np.abs(dinv)) < 50.0 * dp**2


class TestCond2:
    def test_zero_reduction(self, flow_zero, params):
        val, ok = cond2_value(flow_zero, params)
        assert val == pytest.approx(params.g * params.d**3 / params.p0**2, abs=1e-12)
        assert ok

    def test_constant_value(self, flow_const, params):
        val, ok = cond2_value(flow_const, params)
        assert val == pytest.approx(4.0 / 15.0, abs=1e-9)
        assert ok

    def test_failing_case(self, profile_zero):
        params = PhysicalParams(g=9.81, d=1.0, p0=-1.0, alpha=1.0)
        prof = VorticityProfile.zero(-1.0)
        flow = build_laminar(prof, params)
        val, ok = cond2_value(flow, params)
        assert val == pytest.approx(9.81, abs=1e-12)
        assert not ok


def test_csv_export(flow_zero, tmp_path):
    path = tmp_path / "laminar.csv"
    to_csv(flow_zero, path)
    data = np.genfromtxt(path, delimiter=",", names=True)
    assert np.allclose(data["p"], flow_zero.p)
    assert np.allclose(data["H"], flow_zero.H)
    assert np.allclose(data["a"], flow_zero.a)


def test_params_validation():
    with pytest.raises(DomainError):
        PhysicalParams(g=-1.0, d=1.0, p0=-2.0, alpha=0.5)
    with pytest.raises(DomainError):
        PhysicalParams(g=1.0, d=1.0, p0=0.5, alpha=0.5)
