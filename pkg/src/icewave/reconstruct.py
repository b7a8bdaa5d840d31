"""Physical-space fields, Bernoulli constant, and cross-formulation residuals.

The mapped grid (q, p) -> (x, y) = (lam q, h(q, p)) carries all fields;
derivatives with respect to x and y go through the chain rule

    A_x = A_q / lam - (A_p / h_p)(h_q / lam),      A_y = A_p / h_p,

with spectral q-derivatives and second-order finite differences in p, so PDE
residuals are not polluted by interpolation onto a Cartesian grid.  Velocity
components follow from differentiating y = h(x, -psi):

    u = -1 / h_p,     v = -h_q / (lam h_p),

and pressure from the energy constant E = Q/2:

    P = Q/2 - (u^2 + v^2)/2 - g y + Gamma(0) - Gamma(p).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .continuation import HeightField
from .errors import DomainError
from .laminar import LaminarFlow, PhysicalParams
from .surface_ops import PeriodicEvenFn, plate_H, spectral_deriv, spectral_mean
from .vorticity import VorticityProfile, eval_Gamma, eval_gamma

# Coefficient of the second-order truncation bound used as "grid tolerance".
_C_RES = 2.0


@dataclass
class WaveSolution:
    """One wavelength of a steady wave in the moving frame.

    Fields live on the mapped grid: row i is the streamline p_i, column j the
    station x_j = lam q_j.  ``eta`` is the surface row of ``h``.
    """

    lam: float
    p: np.ndarray
    q: np.ndarray
    h: np.ndarray
    eta: np.ndarray
    u: np.ndarray
    v: np.ndarray
    P: np.ndarray
    Q: float
    E: float
    params: PhysicalParams


def spectral_deriv_2d(arr: np.ndarray, order: int) -> np.ndarray:
    """Spectral q-derivative along axis 1."""
    n = arr.shape[1]
    spec = np.fft.rfft(arr, axis=1)
    k = 2.0 * np.pi * np.arange(n // 2 + 1)
    spec = spec * (1j * k) ** order
    if order % 2 == 1:
        spec[:, -1] = 0.0
    return np.fft.irfft(spec, n, axis=1)


def _dp_matrix(arr: np.ndarray, dp: float) -> np.ndarray:
    """Fourth-order p-derivative (5-point stencils, one-sided at the edges).

    Residuals stack two derivative passes; a fourth-order first pass keeps
    the composition second-order accurate up to the boundary rows, so the
    suite measures the solution's own discretization error rather than the
    evaluator's.
    """
    out = np.empty_like(arr)
    out[2:-2] = (arr[:-4] - 8.0 * arr[1:-3] + 8.0 * arr[3:-1] - arr[4:]) / (12.0 * dp)
    out[0] = (-25.0 * arr[0] + 48.0 * arr[1] - 36.0 * arr[2]
              + 16.0 * arr[3] - 3.0 * arr[4]) / (12.0 * dp)
    out[1] = (-3.0 * arr[0] - 10.0 * arr[1] + 18.0 * arr[2]
              - 6.0 * arr[3] + arr[4]) / (12.0 * dp)
    out[-2] = (3.0 * arr[-1] + 10.0 * arr[-2] - 18.0 * arr[-3]
               + 6.0 * arr[-4] - arr[-5]) / (12.0 * dp)
    out[-1] = (25.0 * arr[-1] - 48.0 * arr[-2] + 36.0 * arr[-3]
               - 16.0 * arr[-4] + 3.0 * arr[-5]) / (12.0 * dp)
    return out


class _MappedDerivatives:
    """Chain-rule x/y derivatives of fields on one mapped grid."""

    def __init__(self, h: np.ndarray, lam: float, dp: float):
        self.lam = lam
        self.dp = dp
        self.hq = spectral_deriv_2d(h, 1)
        self.hp = _dp_matrix(h, dp)
        if np.any(self.hp <= 0.0):
            raise DomainError("h_p <= 0 on the grid")

    def d_dx(self, arr: np.ndarray) -> np.ndarray:
        aq = spectral_deriv_2d(arr, 1)
        ap = _dp_matrix(arr, self.dp)
        return aq / self.lam - (ap / self.hp) * (self.hq / self.lam)

    def d_dy(self, arr: np.ndarray) -> np.ndarray:
        return _dp_matrix(arr, self.dp) / self.hp


def _height_grid(field: HeightField, flow: LaminarFlow) -> np.ndarray:
    H = flow.H_of(field.p)
    return H[:, None] + field.w


def bernoulli_Q(field: HeightField, flow: LaminarFlow) -> float:
    """Period mean of |grad psi|^2 on the surface.

    In rescaled variables: mean_q of tr[(lam^2 + h_q^2) / h_p^2] / lam^2.
    """
    h = _height_grid(field, flow)
    lam, dp = field.lam, field.p[1] - field.p[0]
    hq_s = spectral_deriv(h[-1], 1)
    hp_s = (3.0 * h[-1] - 4.0 * h[-2] + h[-3]) / (2.0 * dp)
    if np.any(hp_s <= 0.0):
        raise DomainError("h_p <= 0 at the surface")
    quot = (lam**2 + hq_s**2) / hp_s**2
    return float(np.mean(quot) / lam**2)


def fields_from_height(field: HeightField, flow: LaminarFlow,
                       params: PhysicalParams) -> WaveSolution:
    """Velocities, pressure and surface profile from a height field."""
    h = _height_grid(field, flow)
    lam = field.lam
    dp = field.p[1] - field.p[0]
    der = _MappedDerivatives(h, lam, dp)
    u = -1.0 / der.hp
    v = -der.hq / (lam * der.hp)
    Q = bernoulli_Q(field, flow)
    E = 0.5 * Q
    gamma_corr = eval_Gamma(flow.profile, 0.0) - np.asarray(
        eval_Gamma(flow.profile, field.p), dtype=float
    )
    P = E - 0.5 * (u**2 + v**2) - params.g * h + gamma_corr[:, None]
    return WaveSolution(
        lam=lam, p=field.p.copy(), q=field.q.copy(), h=h, eta=h[-1].copy(),
        u=u, v=v, P=P, Q=Q, E=E, params=params,
    )


@dataclass
class ResidualReport:
    """Max-norm residuals of the three equivalent formulations on one grid."""

    n_p: int
    n_q: int
    dp: float
    values: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    def passed(self) -> bool:
        return all(self.values[k] <= self.tolerances[k] for k in self.values)

    def failing(self) -> list:
        return [k for k in self.values if self.values[k] > self.tolerances[k]]

    def to_dict(self) -> dict:
        return {
            "n_p": self.n_p,
            "n_q": self.n_q,
            "values": {k: float(v) for k, v in sorted(self.values.items())},
            "tolerances": {k: float(v) for k, v in sorted(self.tolerances.items())},
            "passed": self.passed(),
        }


def _tol(dp: float, scale: float) -> float:
    return 1e-9 + _C_RES * dp**2 * scale


def euler_residual(sol: WaveSolution, profile: VorticityProfile) -> ResidualReport:
    """Residual suite over all three formulations of the steady problem.

    Velocity formulation: both momentum equations, incompressibility, the
    dynamic / kinematic / bed conditions and the zero-mean constraint, all by
    mapped-grid finite differences.  Stream-function formulation: the mapped
    Laplacian of psi = -p against gamma(-psi), assembled by a second
    chain-rule pass (independent of u, v).  Height-function formulation: the
    quasilinear equation evaluated directly on h.  Tolerances are
    second-order truncation bounds scaled by the magnitude of the terms
    entering each equation.
    """
    lam, dp = sol.lam, sol.p[1] - sol.p[0]
    g, alpha = sol.params.g, sol.params.alpha
    der = _MappedDerivatives(sol.h, lam, dp)
    u, v, P = sol.u, sol.v, sol.P

    ux, uy = der.d_dx(u), der.d_dy(u)
    vx, vy = der.d_dx(v), der.d_dy(v)
    Px, Py = der.d_dx(P), der.d_dy(P)
    gamma_p = np.asarray(eval_gamma(profile, sol.p), dtype=float)

    values, tols = {}, {}

    def put(name, residual_max, scale):
        values[name] = float(residual_max)
        tols[name] = _tol(dp, scale)

    def mx(arr):
        return float(np.max(np.abs(arr)))

    put("momentum_x", mx(u * ux + v * uy + Px),
        max(mx(u * ux), mx(v * uy), mx(Px), 1.0))
    put("momentum_y", mx(u * vx + v * vy + Py + g),
        max(mx(u * vx), mx(v * vy), mx(Py), g))
    put("incompressibility", mx(ux + vy), max(mx(ux), mx(vy), 1.0))
    put("vorticity", mx(uy - vx - gamma_p[:, None]),
        max(mx(uy), mx(vx), mx(gamma_p), 1.0))

    # Dynamic condition P = alpha H(eta) on the surface; the plate operator
    # acts in q and is scaled back to x-derivatives by lam^-3.
    zeta = PeriodicEvenFn(sol.eta / lam)
    plate = plate_H(zeta).values / lam**3
    put("dynamic_bc", mx(sol.P[-1] - alpha * plate),
        max(mx(sol.P[-1]), mx(alpha * plate), 1.0))

    eta_x = spectral_deriv(sol.eta, 1) / lam
    put("kinematic_bc", mx(sol.v[-1] - sol.u[-1] * eta_x),
        max(mx(sol.v[-1]), mx(sol.u[-1] * eta_x), 1.0))

    values["bed_bc"] = mx(sol.v[0])
    tols["bed_bc"] = 1e-9
    values["eta_mean"] = abs(spectral_mean(sol.eta))
    tols["eta_mean"] = 1e-10
    values["plate_mean"] = abs(spectral_mean(plate)) * lam
    tols["plate_mean"] = 1e-9

    # Stream-function formulation: Delta psi = gamma(-psi) with psi = -p on
    # the mapped grid, via two chain-rule passes.
    psi_grid = np.broadcast_to(-sol.p[:, None], sol.h.shape).copy()
    psi_x = der.d_dx(psi_grid)
    psi_y = der.d_dy(psi_grid)
    lap = der.d_dx(psi_x) + der.d_dy(psi_y)
    put("stream_laplacian", mx(lap - gamma_p[:, None]),
        max(mx(der.d_dx(psi_x)), mx(der.d_dy(psi_y)), mx(gamma_p), 1.0))

    # Bernoulli surface relation |grad psi|^2 + 2 g eta + 2 alpha H(eta) = Q.
    grad2_surf = psi_x[-1] ** 2 + psi_y[-1] ** 2
    bern = grad2_surf + 2.0 * g * sol.eta + 2.0 * alpha * plate - sol.Q
    put("bernoulli", mx(bern), max(mx(grad2_surf), abs(sol.Q), 1.0))

    # Height-function formulation, evaluated directly on h.
    hq = der.hq
    hp = der.hp
    hpp = (sol.h[2:] - 2.0 * sol.h[1:-1] + sol.h[:-2]) / dp**2
    hpq = spectral_deriv_2d(hp, 1)
    hf = (
        (lam**2 + hq[1:-1] ** 2) * hpp
        - 2.0 * hp[1:-1] * hq[1:-1] * hpq[1:-1]
        + hp[1:-1] ** 2 * spectral_deriv_2d(sol.h, 2)[1:-1]
        - lam**2 * gamma_p[1:-1, None] * hp[1:-1] ** 3
    )
    put("height_equation", mx(hf),
        max(mx(lam**2 * hpp), mx(hp[1:-1] ** 2 * spectral_deriv_2d(sol.h, 2)[1:-1]),
            mx(lam**2 * gamma_p[1:-1, None] * hp[1:-1] ** 3), 1.0))

    return ResidualReport(n_p=len(sol.p), n_q=len(sol.q), dp=dp,
                          values=values, tolerances=tols)


def energy_constancy(sol: WaveSolution, profile: VorticityProfile,
                     n_samples: int = 10, seed: int = 1234) -> float:
    """Max deviation of 2E from Q at random interior grid points."""
    rng = np.random.default_rng(seed)
    gamma_corr = eval_Gamma(profile, 0.0) - np.asarray(
        eval_Gamma(profile, sol.p), dtype=float
    )
    worst = 0.0
    for _ in range(n_samples):
        i = int(rng.integers(1, len(sol.p) - 1))
        j = int(rng.integers(0, len(sol.q)))
        e = (
            sol.P[i, j]
            + 0.5 * (sol.u[i, j] ** 2 + sol.v[i, j] ** 2)
            + sol.params.g * sol.h[i, j]
            - gamma_corr[i]
        )
        worst = max(worst, abs(2.0 * e - sol.Q))
    return worst


def profile_diagnostics(eta: np.ndarray, lam: float) -> dict:
    """Crest/trough locations, monotonicity and symmetry of one period."""
    n = len(eta)
    x = lam * np.arange(n) / n
    span = float(np.max(eta) - np.min(eta))
    if span < 1e-13 * max(1.0, float(np.max(np.abs(eta)))) or span == 0.0:
        return {
            "degenerate": True, "crest_x": None, "trough_x": None,
            "monotone": False, "symmetry_defect": 0.0,
            "mean": float(np.mean(eta)),
        }
    i_crest = int(np.argmax(eta))
    i_trough = int(np.argmin(eta))
    mirrored = np.roll(eta[::-1], 1)
    symmetry_defect = float(np.max(np.abs(eta - mirrored)))
    # Strict monotonicity from crest to trough along increasing x (periodic).
    idx = np.arange(i_crest, i_crest + (i_trough - i_crest) % n + 1) % n
    segment = eta[idx]
    monotone = bool(np.all(np.diff(segment) < 0.0)) if len(segment) > 1 else False
    return {
        "degenerate": False,
        "crest_x": float(x[i_crest]),
        "trough_x": float(x[i_trough]),
        "monotone": monotone,
        "symmetry_defect": symmetry_defect,
        "mean": float(np.mean(eta)),
    }


# ----------------------------------------------------------------------------
# serialization
# ----------------------------------------------------------------------------

def solution_to_csv(sol: WaveSolution, path) -> None:
    """Long-format grid dump: q,p,h,u,v,P rows with 17 significant digits."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["q", "p", "h", "u", "v", "P"])
        for i, pv in enumerate(sol.p):
            for j, qv in enumerate(sol.q):
                writer.writerow([
                    f"{qv:.17g}", f"{pv:.17g}", f"{sol.h[i, j]:.17g}",
                    f"{sol.u[i, j]:.17g}", f"{sol.v[i, j]:.17g}",
                    f"{sol.P[i, j]:.17g}",
                ])


def solution_from_csv(path, lam: float, params: PhysicalParams) -> WaveSolution:
    """Rebuild a WaveSolution from a grid dump written by solution_to_csv."""
    import csv

    qs, ps, rows = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["q", "p", "h", "u", "v", "P"]:
            raise DomainError(f"unexpected header in {path}: {header}")
        for row in reader:
            rows.append([float(c) for c in row])
    data = np.array(rows)
    q = np.unique(data[:, 0])
    p = np.unique(data[:, 1])
    n_q, n_p = len(q), len(p)
    if n_p * n_q != len(data):
        raise DomainError(f"grid dump in {path} is not a full tensor grid")
    h = data[:, 2].reshape(n_p, n_q)
    u = data[:, 3].reshape(n_p, n_q)
    v = data[:, 4].reshape(n_p, n_q)
    P = data[:, 5].reshape(n_p, n_q)
    eta = h[-1].copy()
    dp = p[1] - p[0]
    hq_s = spectral_deriv(eta, 1)
    hp_s = (3.0 * h[-1] - 4.0 * h[-2] + h[-3]) / (2.0 * dp)
    Q = float(np.mean((lam**2 + hq_s**2) / hp_s**2) / lam**2)
    return WaveSolution(lam=lam, p=p, q=q, h=h, eta=eta, u=u, v=v, P=P,
                        Q=Q, E=0.5 * Q, params=params)


def summary_to_json(sol: WaveSolution, report: ResidualReport, path,
                    extra: dict | None = None) -> None:
    diag = profile_diagnostics(sol.eta, sol.lam)
    payload = {
        "lambda": sol.lam,
        "Q": sol.Q,
        "crest": diag["crest_x"],
        "trough": diag["trough_x"],
        "residuals": report.to_dict(),
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
