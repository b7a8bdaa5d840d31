"""Closed-form reference values used as independent test oracles.

Everything in here is deliberately self-contained: the root finder is a plain
bisection and the quadrature a composite Simpson rule, so no code path is
shared with the shooting/root-finding machinery these oracles are meant to
check.
"""

from __future__ import annotations

import numpy as np

from .errors import ConditionFailedError, DomainError
from .laminar import LaminarFlow, PhysicalParams

_BISECT_ITERS = 200


def _bisect(fn, lo: float, hi: float) -> float:
    """Plain bisection; assumes fn(lo) < 0 < fn(hi) or the reverse."""
    flo, fhi = fn(lo), fn(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise DomainError(f"no sign change on bracket [{lo}, {hi}]")
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        fmid = fn(mid)
        if fmid == 0.0 or (hi - lo) < 1e-15 * max(1.0, abs(mid)):
            return mid
        if np.sign(fmid) == np.sign(flo):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _simpson(values: np.ndarray, dx: float) -> float:
    """Composite Simpson rule over uniformly spaced samples (odd count)."""
    n = len(values)
    if n % 2 == 0:
        raise DomainError("Simpson rule needs an odd number of samples")
    weights = np.ones(n)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    return float(dx / 3.0 * np.dot(weights, values))


def irrotational_C0(params: PhysicalParams) -> float:
    """The constant C0 for gamma = 0, from the dispersion relation.

    Root of (g + alpha C^2) tanh(sqrt(C) d) = (p0^2 / d^2) sqrt(C), valid
    when g d^3 / p0^2 < 1.
    """
    g, d, p0, alpha = params.g, params.d, params.p0, params.alpha
    if not g * d**3 / p0**2 < 1.0:
        raise ConditionFailedError(
            f"g d^3/p0^2 = {g * d**3 / p0**2} >= 1: no bifurcation point",
            value=g * d**3 / p0**2,
        )

    def fn(C):
        return (g + alpha * C**2) * np.tanh(np.sqrt(C) * d) - (p0**2 / d**2) * np.sqrt(C)

    lo = 1e-12
    while fn(lo) >= 0.0:
        lo *= 0.5
        if lo < 1e-300:  # pragma: no cover - defensive
            raise DomainError("failed to bracket C0 from below")
    hi = 1.0
    while fn(hi) <= 0.0:
        hi *= 2.0
        if hi > 1e300:  # pragma: no cover - defensive
            raise DomainError("failed to bracket C0 from above")
    return _bisect(fn, lo, hi)


def irrotational_lambda_star(params: PhysicalParams) -> float:
    """Minimal bifurcation wavelength for gamma = 0.

    Computed both as 2 pi / sqrt(C0) and as the direct root of the
    dispersion relation in the wavelength; the two must agree to 1e-10.
    """
    g, d, p0, alpha = params.g, params.d, params.p0, params.alpha
    lam_from_c0 = 2.0 * np.pi / np.sqrt(irrotational_C0(params))

    def fn(lam):
        k = 2.0 * np.pi / lam
        return (g + alpha * k**4) * np.tanh(k * d) - (p0**2 / d**2) * k

    lam_direct = _bisect(fn, 0.5 * lam_from_c0, 2.0 * lam_from_c0)
    if abs(lam_direct - lam_from_c0) > 1e-10 * lam_from_c0:  # pragma: no cover
        raise DomainError(
            f"dispersion-relation roots disagree: {lam_direct} vs {lam_from_c0}"
        )
    return lam_from_c0


def constant_a_shoot(params: PhysicalParams, a_const: float, lam: float, mu: float):
    """Endpoint values of the shooting solution when a is constant.

    f(p) = sinh(kappa (p - p0)) / kappa with kappa = sqrt(mu) / (lam * a);
    returns (f(0), f'(0)).
    """
    if a_const <= 0.0 or mu <= 0.0:
        raise DomainError("constant_a_shoot needs a_const > 0 and mu > 0")
    kappa = np.sqrt(mu) / (lam * a_const)
    span = -params.p0
    return float(np.sinh(kappa * span) / kappa), float(np.cosh(kappa * span))


def wloo_W0(flow: LaminarFlow, params: PhysicalParams, lam: float) -> float:
    """W(lam, 0) = lam^4 a^3(p0) (g int a^-3 dp - 1), via Simpson on the a-grid."""
    dx = flow.p[1] - flow.p[0]
    integral = _simpson(flow.a**-3.0, dx)
    return float(lam**4 * flow.a[0] ** 3 * (params.g * integral - 1.0))
