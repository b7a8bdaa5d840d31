import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icewave.errors import DomainError
from icewave.vorticity import VorticityProfile, eval_Gamma, eval_gamma, max_Gamma


def linear_profile():
    # gamma(p) = p on [-1, 0]; Gamma(p) = (p^2 - 1)/2, decreasing.
    p = np.linspace(-1.0, 0.0, 5)
    return VorticityProfile.tabulated(p, p)


class TestEvalGamma:
    def test_zero(self):
        assert eval_gamma(VorticityProfile.zero(-2.0), -1.0) == 0.0

    def test_constant(self):
        assert eval_gamma(VorticityProfile.constant(1.0, -2.0), -0.5) == 1.0

    def test_tabulated_at_node(self):
        # PCHIP through linear data reproduces the line.
        assert eval_gamma(linear_profile(), -0.5) == pytest.approx(-0.5, abs=1e-12)

    def test_outside_domain_raises(self):
        with pytest.raises(DomainError):
            eval_gamma(VorticityProfile.zero(-2.0), -2.5)
        with pytest.raises(DomainError):
            eval_gamma(linear_profile(), 0.5)


class TestEvalGammaIntegral:
    def test_zero(self):
        prof = VorticityProfile.zero(-2.0)
        assert eval_Gamma(prof, -0.7) == 0.0

    def test_constant_linear(self):
        prof = VorticityProfile.constant(1.0, -2.0)
        assert eval_Gamma(prof, 0.0) == pytest.approx(2.0, abs=1e-14)

    def test_tabulated_analytic(self):
        # int_{-1}^{0} s ds = -1/2
        assert eval_Gamma(linear_profile(), 0.0) == pytest.approx(-0.5, abs=1e-10)

    def test_anchored_at_p0(self):
        for prof in (VorticityProfile.zero(-2.0),
                     VorticityProfile.constant(-3.0, -2.0),
                     linear_profile()):
            assert eval_Gamma(prof, prof.p0) == 0.0


class TestMaxGamma:
    def test_zero(self):
        assert max_Gamma(VorticityProfile.zero(-2.0)) == 0.0

    def test_constant_increasing(self):
        assert max_Gamma(VorticityProfile.constant(1.0, -2.0)) == pytest.approx(2.0)

    def test_tabulated_decreasing(self):
        # Gamma decreasing: max at the left endpoint where Gamma = 0.
        assert max_Gamma(linear_profile()) == pytest.approx(0.0, abs=1e-12)

    def test_interior_maximum(self):
        # gamma changes sign at p = -1: Gamma peaks there.
        p = np.linspace(-2.0, 0.0, 41)
        prof = VorticityProfile.tabulated(p, -(p + 1.0))
        assert max_Gamma(prof) == pytest.approx(0.5, abs=1e-8)

    @given(st.floats(min_value=-2.0, max_value=0.0))
    @settings(max_examples=100, deadline=None)
    def test_dominates_pointwise(self, p):
        prof = _CACHED_PROFILE
        assert max_Gamma(prof) >= eval_Gamma(prof, p) - 1e-12
        assert max_Gamma(prof) >= 0.0


_CACHED_PROFILE = VorticityProfile.tabulated(
    np.linspace(-2.0, 0.0, 21), np.sin(np.linspace(-2.0, 0.0, 21))
)


@given(st.floats(min_value=-1.9, max_value=-0.1))
@settings(max_examples=20, deadline=None)
def test_Gamma_derivative_matches_gamma(p):
    prof = _CACHED_PROFILE
    step = 1e-5
    fd = (eval_Gamma(prof, p + step) - eval_Gamma(prof, p - step)) / (2.0 * step)
    assert fd == pytest.approx(eval_gamma(prof, p), abs=5e-9)


class TestConstruction:
    def test_nonnegative_p0_rejected(self):
        with pytest.raises(DomainError):
            VorticityProfile.zero(0.0)

    def test_unsorted_samples_rejected(self):
        with pytest.raises(DomainError):
            VorticityProfile.tabulated([-1.0, -1.5, 0.0], [0.0, 0.0, 0.0])

    def test_samples_must_reach_zero(self):
        with pytest.raises(DomainError):
            VorticityProfile.tabulated([-1.0, -0.5], [0.0, 0.0])

    def test_csv_round_trip(self, tmp_path):
        path = tmp_path / "gamma.csv"
        path.write_text("p,gamma\n-1,-1\n-0.5,-0.5\n0,0\n")
        prof = VorticityProfile.from_csv(path)
        assert prof.p0 == -1.0
        assert eval_gamma(prof, -0.25) == pytest.approx(-0.25, abs=1e-12)

    def test_csv_bad_header(self, tmp_path):
        path = tmp_path / "gamma.csv"
        path.write_text("x,y\n-1,0\n0,0\n")
        with pytest.raises(DomainError):
            VorticityProfile.from_csv(path)
