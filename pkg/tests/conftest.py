"""Shared fixtures: the three reference configurations used across the suite.

All heavy objects (laminar flows, bifurcation points, branch solves) are
session-scoped so the acceptance module and the unit tests share one
computation.
"""

import numpy as np
import pytest

from icewave.continuation import Grid, HeightField, continue_branch, newton_solve
from icewave.laminar import PhysicalParams, build_laminar
from icewave.sturm import bifurcation_point
from icewave.vorticity import VorticityProfile

# Reference parameters: g d^3 / p0^2 = 1/4 < 1, so the zero-vorticity case
# admits a bifurcation point.
PARAMS_REF = PhysicalParams(g=1.0, d=1.0, p0=-2.0, alpha=0.5)


def tabulated_profile():
    # gamma(p) = 0.3 p^2 tabulated at 17 nodes; Gamma increasing, max at p=0.
    p = np.linspace(-2.0, 0.0, 17)
    return VorticityProfile.tabulated(p, 0.3 * p**2)


@pytest.fixture(scope="session")
def params():
    return PARAMS_REF


@pytest.fixture(scope="session")
def profile_zero():
    return VorticityProfile.zero(-2.0)


@pytest.fixture(scope="session")
def profile_const():
    return VorticityProfile.constant(1.0, -2.0)


@pytest.fixture(scope="session")
def profile_tab():
    return tabulated_profile()


@pytest.fixture(scope="session")
def flow_zero(profile_zero, params):
    return build_laminar(profile_zero, params)


@pytest.fixture(scope="session")
def flow_const(profile_const, params):
    return build_laminar(profile_const, params)


@pytest.fixture(scope="session")
def flow_tab(profile_tab, params):
    return build_laminar(profile_tab, params)


@pytest.fixture(scope="session")
def all_flows(flow_zero, flow_const, flow_tab):
    return {"zero": flow_zero, "constant": flow_const, "tabulated": flow_tab}


@pytest.fixture(scope="session")
def bif_zero(flow_zero, params):
    return bifurcation_point(flow_zero, params)


@pytest.fixture(scope="session")
def bif_const(flow_const, params):
    return bifurcation_point(flow_const, params)


@pytest.fixture(scope="session")
def bif_tab(flow_tab, params):
    return bifurcation_point(flow_tab, params)


@pytest.fixture(scope="session")
def grid_ref(flow_zero):
    return Grid(flow_zero, n_q=64, n_p=129)


@pytest.fixture(scope="session")
def branch_points(flow_zero, params, bif_zero, grid_ref):
    """Converged solutions at s = 1e-3, 5e-4, 2.5e-4 on the default grid."""
    kernel = grid_ref.kernel_field(bif_zero, normalize=True)
    out = {}
    for s in (1e-3, 5e-4, 2.5e-4):
        guess = HeightField(w=s * kernel.w, lam=bif_zero.lambda_star, p0=params.p0)
        out[s] = newton_solve(guess, bif_zero.lambda_star, s, kernel,
                              flow_zero, params, grid=grid_ref)
    return out


@pytest.fixture(scope="session")
def branch_point_fine(flow_zero, params, bif_zero):
    """One converged solution at s = 1e-3 on the doubled grid."""
    grid = Grid(flow_zero, n_q=128, n_p=257)
    kernel = grid.kernel_field(bif_zero, normalize=True)
    guess = HeightField(w=1e-3 * kernel.w, lam=bif_zero.lambda_star, p0=params.p0)
    return newton_solve(guess, bif_zero.lambda_star, 1e-3, kernel,
                        flow_zero, params, grid=grid)
