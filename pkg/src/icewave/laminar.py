"""Laminar (x-independent) flow solutions and their solvability conditions.

The trivial solution is fully determined by the constant theta > 2 max Gamma
solving the depth condition

    D(theta) = int_{p0}^0 (theta - 2 Gamma(s))^(-1/2) ds = d.

From theta we get a = (theta - 2 Gamma)^(1/2), the streamline height
H(p) = -int_p^0 ds / a(s), and the bifurcation admissibility number
g * int_{p0}^0 a^-3 dp (which must be < 1 for waves to branch off).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import ConditionFailedError, DomainError
from .vorticity import VorticityProfile, eval_Gamma, max_Gamma

_QUAD_KW = dict(epsabs=1e-12, epsrel=1e-10, limit=200)

# Decreasing offsets used to probe the theta -> 2 max Gamma limit.
_LIMIT_DELTAS = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
_LIMIT_BIG = 1e12


@dataclass(frozen=True)
class PhysicalParams:
    """Gravity g, depth d, relative mass flux p0 < 0 and plate rigidity alpha."""

    g: float
    d: float
    p0: float
    alpha: float

    def __post_init__(self):
        for name in ("g", "d", "alpha"):
            if not getattr(self, name) > 0.0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.p0 < 0.0:
            raise DomainError(f"p0 must be negative, got {self.p0}")


@dataclass(frozen=True)
class LaminarFlow:
    """The unique laminar solution for a given profile and parameter set.

    ``H`` and ``a`` are sampled on the uniform grid ``p``; ``theta`` allows
    exact re-evaluation of a at arbitrary p via a^2 = theta - 2 Gamma(p).
    ``a_min``/``a_max`` are the extrema of a on the grid and ``cond2_value``
    stores g * int a^-3 dp.
    """

    theta: float
    p: np.ndarray
    H: np.ndarray
    a: np.ndarray
    a_min: float
    a_max: float
    cond2_value: float
    profile: VorticityProfile
    params: PhysicalParams

    def a_of(self, p):
        """a evaluated exactly from theta and Gamma (no grid interpolation)."""
        val = self.theta - 2.0 * eval_Gamma(self.profile, p)
        return np.sqrt(val)

    def Hp_of(self, p):
        """H'(p) = 1/a(p)."""
        return 1.0 / self.a_of(p)

    def Hpp_of(self, p):
        """H''(p) = gamma(p) H'(p)^3, from the laminar ODE."""
        from .vorticity import eval_gamma

        return eval_gamma(self.profile, p) / self.a_of(p) ** 3

    def H_of(self, p):
        """H(p) = -int_p^0 ds/a(s) by adaptive quadrature."""
        p_arr = np.atleast_1d(np.asarray(p, dtype=float))
        out = np.array(
            [-quad(lambda s: 1.0 / self.a_of(s), pv, 0.0, **_QUAD_KW)[0] for pv in p_arr]
        )
        return out if np.ndim(p) else float(out[0])


def _check_match(profile: VorticityProfile, params: PhysicalParams) -> None:
    if abs(profile.p0 - params.p0) > 1e-14:
        raise DomainError(
            f"profile.p0={profile.p0} and params.p0={params.p0} must agree"
        )


def depth_integral(profile: VorticityProfile, theta: float) -> float:
    """D(theta) = int_{p0}^0 (theta - 2 Gamma(s))^(-1/2) ds, theta > 2 max Gamma."""
    two_max = 2.0 * max_Gamma(profile)
    if not theta > two_max:
        raise DomainError(f"theta={theta} must exceed 2 max Gamma = {two_max}")
    if profile.kind == "zero":
        return -profile.p0 / np.sqrt(theta)

    def integrand(s):
        return (theta - 2.0 * eval_Gamma(profile, s)) ** -0.5

    val, _ = quad(integrand, profile.p0, 0.0, points=_quad_points(profile),
                  **_QUAD_KW)
    return val


def _quad_points(profile: VorticityProfile):
    """Interior break points for the quadrature: interpolation knots (the
    integrand is only piecewise smooth there) and the maximizer of Gamma
    (the integrand peaks there and becomes singular in the
    theta -> 2 max Gamma limit)."""
    pts = set()
    ps = np.linspace(profile.p0, 0.0, 513)
    vals = eval_Gamma(profile, ps)
    i = int(np.argmax(vals))
    if 0 < i < len(ps) - 1:
        pts.add(float(ps[i]))
    if profile.p_samples is not None:
        pts.update(float(p) for p in profile.p_samples[1:-1])
    return sorted(pts) or None


def check_existence(profile: VorticityProfile, d: float):
    """Decide the laminar existence condition lim D(theta) > d.

    The limit theta -> 2 max Gamma is probed along a decreasing offset
    sequence; the values increase monotonically, so either they exceed any
    bound (limit = inf) or they converge and the tail is extrapolated with
    an empirically fitted power of the offset.

    Returns ``(exists, limit)`` where ``limit`` may be ``inf``.
    """
    two_max = 2.0 * max_Gamma(profile)
    vals = []
    for delta in _LIMIT_DELTAS:
        theta = two_max * (1.0 + delta) + delta
        vals.append(depth_integral(profile, theta))
        if vals[-1] > _LIMIT_BIG:
            return True, np.inf
    v1, v2, v3 = vals[-3], vals[-2], vals[-1]
    d32, d21 = v3 - v2, v2 - v1
    if d21 <= 0.0 or d32 <= 0.0:
        limit = v3
    else:
        ratio = d32 / d21
        if ratio >= 0.95:
            # Increments not shrinking: divergent limit.
            return True, np.inf
        # Geometric-tail extrapolation: v_k ~ limit - c * r^k.
        limit = v3 + d32 * ratio / (1.0 - ratio)
    return bool(limit > d), float(limit)


def solve_theta(profile: VorticityProfile, params: PhysicalParams) -> float:
    """The unique theta > 2 max Gamma with D(theta) = d.

    D is strictly decreasing in theta, so a bracketing root-find applies as
    soon as the existence condition holds.
    """
    _check_match(profile, params)
    exists, limit = check_existence(profile, params.d)
    if not exists:
        raise ConditionFailedError(
            f"no laminar flow: lim D(theta) = {limit} <= d = {params.d}", value=limit
        )
    two_max = 2.0 * max_Gamma(profile)
    lo = two_max * (1.0 + 1e-12) + 1e-12
    hi = max(two_max + 1.0, 2.0 * two_max + 1.0)
    while depth_integral(profile, hi) >= params.d:
        hi *= 2.0
        if hi > 1e18:  # pragma: no cover - defensive
            raise ConditionFailedError("theta bracket expansion failed", value=limit)
    # D(lo) may still be below d if the limit barely exceeds d; walk lo down.
    if depth_integral(profile, lo) <= params.d:
        raise ConditionFailedError(
            f"depth integral at bracket base {depth_integral(profile, lo)} <= d",
            value=limit,
        )
    return float(
        brentq(
            lambda t: depth_integral(profile, t) - params.d,
            lo,
            hi,
            xtol=1e-15,
            rtol=8.9e-16,
        )
    )


def build_laminar(
    profile: VorticityProfile, params: PhysicalParams, n_p: int = 257
) -> LaminarFlow:
    """Solve for theta and sample H and a on a uniform p-grid."""
    _check_match(profile, params)
    theta = solve_theta(profile, params)
    p = np.linspace(params.p0, 0.0, n_p)
    a = np.sqrt(theta - 2.0 * eval_Gamma(profile, p))

    def inv_a(s):
        return (theta - 2.0 * eval_Gamma(profile, s)) ** -0.5

    H = np.empty(n_p)
    H[-1] = 0.0
    # Accumulate panel integrals of 1/a so each H(p_i) carries quad accuracy.
    for i in range(n_p - 2, -1, -1):
        panel, _ = quad(inv_a, p[i], p[i + 1], **_QUAD_KW)
        H[i] = H[i + 1] - panel
    flow = LaminarFlow(
        theta=theta,
        p=p,
        H=H,
        a=a,
        a_min=float(a.min()),
        a_max=float(a.max()),
        cond2_value=_cond2_integral(profile, params, theta),
        profile=profile,
        params=params,
    )
    return flow


def _cond2_integral(profile, params, theta) -> float:
    if profile.kind == "zero":
        return params.g * (-params.p0) * theta ** -1.5
    val, _ = quad(
        lambda s: (theta - 2.0 * eval_Gamma(profile, s)) ** -1.5,
        params.p0,
        0.0,
        points=_quad_points(profile),
        **_QUAD_KW,
    )
    return params.g * val


def cond2_value(flow: LaminarFlow, params: PhysicalParams):
    """g * int a^-3 dp and whether the strict inequality < 1 holds.

    Exact equality counts as failed: the bifurcation argument needs the
    strict version.
    """
    val = _cond2_integral(flow.profile, params, flow.theta)
    return val, bool(val < 1.0)


def to_csv(flow: LaminarFlow, path) -> None:
    """Write the sampled laminar flow as ``p,H,a`` with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p", "H", "a"])
        for pv, Hv, av in zip(flow.p, flow.H, flow.a):
            writer.writerow([f"{pv:.17g}", f"{Hv:.17g}", f"{av:.17g}"])
