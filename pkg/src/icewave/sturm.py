"""Shooting for the boundary Sturm-Liouville systems and the bifurcation point.

The linearized problem reduces, mode by mode, to

    lam^2 (a^3 f')' - mu a f = 0   on [p0, 0],
    f(p0) = 0,

with the elastic-surface condition (g lam^4 + alpha mu^2) f(0)
= lam^4 a^3(0) f'(0).  Shooting from the bottom with f'(p0) = 1 turns the
surface condition into the scalar function

    W(lam, mu) = (g lam^4 + alpha mu^2) f1(0) - lam^4 a^3(0) f1'(0),

whose unique positive root mu(lam) obeys the scaling law mu(lam) = C0 lam^2.
The minimal bifurcation wavelength is lam* = 2 pi / sqrt(C0) and the kernel
profile is the shooting solution at (lam*, (2 pi)^2).

The ODE is integrated in the conservative variables (f, v = a^3 f'); the
coefficient a is evaluated exactly from theta and Gamma, never differentiated.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import ConditionFailedError, NumericalError
from .laminar import LaminarFlow, PhysicalParams

_IVP_KW = dict(method="RK45", rtol=1e-12, atol=1e-14)
_N_SAMPLES = 513
_MU_MAX = 1e12


@dataclass(frozen=True)
class ShootResult:
    """Shooting solution sampled on a uniform p-grid, plus endpoint data.

    ``interp`` is the integrator's dense-output interpolant mapping p to
    (f, a^3 f'), usable for re-sampling on other grids.
    """

    p: np.ndarray
    f: np.ndarray
    fp: np.ndarray
    f0: float
    fp0: float
    lam: float
    mu: float
    interp: object = field(default=None, repr=False, compare=False)

    def f_of(self, p):
        """f evaluated through the dense interpolant."""
        return self.interp(p)[0]


@dataclass(frozen=True)
class BifurcationPoint:
    """C0, the minimal wavelength lam* = 2 pi / sqrt(C0), and the kernel profile."""

    C0: float
    lambda_star: float
    f1_star: ShootResult
    mode_k: int = 1

    def to_record(self) -> dict:
        return {
            "C0": self.C0,
            "lambda_star": self.lambda_star,
            "mode_k": self.mode_k,
            "f1_star": list(map(float, self.f1_star.f)),
            "f1_star_p": list(map(float, self.f1_star.p)),
        }


def _integrate(flow: LaminarFlow, lam: float, mu: float, forward: bool,
               y0: np.ndarray) -> ShootResult:
    """Integrate (f, v = a^3 f') between p0 and 0 in either direction."""
    if lam <= 0.0:
        raise NumericalError(f"lam must be positive, got {lam}")
    p0 = flow.params.p0

    def rhs(p, y):
        a = flow.a_of(p)
        return [y[1] / a**3, (mu / lam**2) * a * y[0]]

    span = (p0, 0.0) if forward else (0.0, p0)
    grid = np.linspace(span[0], span[1], _N_SAMPLES)
    sol = solve_ivp(rhs, span, y0, t_eval=grid, dense_output=True, **_IVP_KW)
    if not sol.success:  # pragma: no cover - defensive
        raise NumericalError(
            f"shooting failed at lam={lam}, mu={mu}: {sol.message}",
            diagnostics={"lam": lam, "mu": mu},
        )
    p = sol.t if forward else sol.t[::-1]
    f = sol.y[0] if forward else sol.y[0][::-1]
    v = sol.y[1] if forward else sol.y[1][::-1]
    fp = v / flow.a_of(p) ** 3
    return ShootResult(p=p, f=f, fp=fp, f0=float(f[-1]), fp0=float(fp[-1]),
                       lam=lam, mu=mu, interp=sol.sol)


def shoot_f1(flow: LaminarFlow, lam: float, mu: float) -> ShootResult:
    """Shoot from the bed with f(p0) = 0, f'(p0) = 1."""
    a0 = flow.a_of(flow.params.p0)
    return _integrate(flow, lam, mu, forward=True, y0=np.array([0.0, a0**3]))


def shoot_f2(flow: LaminarFlow, params: PhysicalParams, lam: float,
             mu: float) -> ShootResult:
    """Shoot backwards from the surface with the elastic-condition data.

    f2(0) = lam^4 a^3(0), f2'(0) = g lam^4 + alpha mu^2; used for
    cross-checks only (the Wronskian is assembled from f1 alone).
    """
    a_surf = flow.a_of(0.0)
    f2_0 = lam**4 * a_surf**3
    v2_0 = a_surf**3 * (params.g * lam**4 + params.alpha * mu**2)
    return _integrate(flow, lam, mu, forward=False, y0=np.array([f2_0, v2_0]))


def wronskian(flow: LaminarFlow, params: PhysicalParams, lam: float,
              mu: float) -> float:
    """W(lam, mu) = (g lam^4 + alpha mu^2) f1(0) - lam^4 a^3(0) f1'(0)."""
    res = shoot_f1(flow, lam, mu)
    a_surf = flow.a_of(0.0)
    return float(
        (params.g * lam**4 + params.alpha * mu**2) * res.f0
        - lam**4 * a_surf**3 * res.fp0
    )


def find_mu(flow: LaminarFlow, params: PhysicalParams, lam: float) -> float:
    """The unique positive root of W(lam, .).

    Requires the admissibility condition g int a^-3 < 1 (so W(lam, 0) < 0);
    the bracket is expanded geometrically from mu = 1 and refined by Brent.
    W is rescaled by lam^4 a^3(p0) during the search to keep the bracket
    well-conditioned across lam sweeps.
    """
    if not flow.cond2_value < 1.0:
        raise ConditionFailedError(
            f"g int a^-3 = {flow.cond2_value} >= 1: W(lam, .) has no positive root",
            value=flow.cond2_value,
        )
    scale = lam**4 * flow.a_of(params.p0) ** 3

    def w(mu):
        return wronskian(flow, params, lam, mu) / scale

    hi = 1.0
    w_hi = w(hi)
    while w_hi <= 0.0:
        hi *= 4.0
        if hi > _MU_MAX:
            raise NumericalError(f"no sign change of W below mu = {_MU_MAX}")
        w_hi = w(hi)
    lo = hi / 4.0
    while lo > 0.0 and w(lo) > 0.0:
        lo /= 4.0
        if lo < 1e-18:  # pragma: no cover - defensive
            break
    return float(brentq(w, lo, hi, xtol=1e-14, rtol=8.9e-16))


def bifurcation_point(flow: LaminarFlow, params: PhysicalParams) -> BifurcationPoint:
    """C0 = mu(1), lam* = 2 pi / sqrt(C0), and the kernel profile f1,*.

    Any reference wavelength works because mu(lam) = C0 lam^2; lam = 1 is the
    convention, and the scaling law is cross-checked by tests.
    """
    C0 = find_mu(flow, params, 1.0)
    lambda_star = 2.0 * np.pi / np.sqrt(C0)
    mu_star = (2.0 * np.pi) ** 2
    f1_star = shoot_f1(flow, lambda_star, mu_star)
    w_at_star = wronskian(flow, params, lambda_star, mu_star)
    scale = lambda_star**4 * flow.a_of(params.p0) ** 3
    if abs(w_at_star) > 1e-8 * scale:  # pragma: no cover - defensive
        raise NumericalError(
            f"W(lam*, (2 pi)^2) = {w_at_star} not within tolerance of zero",
            diagnostics={"C0": C0, "lambda_star": lambda_star},
        )
    return BifurcationPoint(C0=C0, lambda_star=lambda_star, f1_star=f1_star)


def scan_wronskian(flow: LaminarFlow, params: PhysicalParams, lams, mus) -> np.ndarray:
    """Rows (lam, mu, W) over the cartesian product of the two axes."""
    rows = []
    for lam in lams:
        for mu in mus:
            rows.append((lam, mu, wronskian(flow, params, lam, mu)))
    return np.array(rows)


def scan_to_csv(scan: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "mu", "W"])
        for lam, mu, wval in scan:
            writer.writerow([f"{lam:.17g}", f"{mu:.17g}", f"{wval:.17g}"])


def bifurcation_to_json(bif: BifurcationPoint, path) -> None:
    with open(path, "w") as fh:
        json.dump(bif.to_record(), fh, indent=2, sort_keys=True)
        fh.write("\n")
