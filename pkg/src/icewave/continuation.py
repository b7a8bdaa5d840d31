"""Discretized bifurcation problem on the strip and Newton branch following.

Unknown is the perturbation w = h - H of the height function on
Omega = [0,1) x [p0, 0], even and 1-periodic in q, zero on the bed.  The
residual couples the quasilinear interior equation (cosine-spectral in q,
second-order central differences in p) with the nonlocal surface condition
tr w = Psi(lam, w + H).  Wave branches solve the augmented system

    F(lam, w) = 0,   <w, h*> = s,

for (w, lam) by damped Newton with an analytically assembled interior
Jacobian and finite-difference columns for the surface rows and lam.

Internally only the half-grid values j = 0..N_q/2 are unknowns (evenness is
structural); full-grid arrays are reconstructed by mirroring.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import simpson
from scipy.sparse.linalg import splu

from .errors import DomainError, NumericalError
from .laminar import LaminarFlow, PhysicalParams
from .sturm import BifurcationPoint
from .surface_ops import (
    PeriodicEvenFn,
    SurfaceTraces,
    helmholtz_values,
    op_Psi,
    spectral_antideriv,
    spectral_deriv,
    spectral_mean,
)

_FD_STEP = 1e-7
_MAX_HALVINGS = 8

# A discrete kernel mode's smallest singular value is pure O(dp^2)
# discretization error, while non-kernel modes keep a dp-independent spectral
# gap of order a * |mu - mu(lam)|.  A dp^(3/2) threshold scaled by the
# natural eigenvalue magnitude separates the two regimes with >= 20x margin
# either way on desk-scale grids (measured on the reference configurations).
_KERNEL_TOL_COEFF = 1.0


def _kernel_threshold(grid, lam: float, k: int) -> float:
    mu = (2.0 * np.pi * k) ** 2
    scale = grid.flow.a_min * mu + lam**2 * grid.flow.a_min**3
    return _KERNEL_TOL_COEFF * grid.dp**1.5 * scale


# ----------------------------------------------------------------------------
# fields and grids
# ----------------------------------------------------------------------------

@dataclass
class HeightField:
    """Perturbation w = h - H on the (N_p, N_q) tensor grid, plus lam.

    ``w[i, j]`` is the value at p_i = p0 + i dp, q_j = j / N_q.  The bed row
    w[0, :] is identically zero and the data is even in q.
    """

    w: np.ndarray
    lam: float
    p0: float

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        n_p, n_q = self.w.shape
        if n_q & (n_q - 1):
            raise DomainError(f"N_q must be a power of two, got {n_q}")
        if np.max(np.abs(self.w[0])) != 0.0:
            raise DomainError("w must vanish identically on the bed row")
        mirrored = np.roll(self.w[:, ::-1], 1, axis=1)
        scale = max(1.0, float(np.max(np.abs(self.w))))
        if np.max(np.abs(self.w - mirrored)) > 1e-13 * scale:
            raise DomainError("w must be even in q")
        if self.lam <= 0.0:
            raise DomainError(f"lam must be positive, got {self.lam}")

    @property
    def n_p(self):
        return self.w.shape[0]

    @property
    def n_q(self):
        return self.w.shape[1]

    @property
    def p(self):
        return np.linspace(self.p0, 0.0, self.n_p)

    @property
    def q(self):
        return np.arange(self.n_q) / self.n_q

    @classmethod
    def zero(cls, lam: float, p0: float, n_p: int, n_q: int) -> "HeightField":
        return cls(w=np.zeros((n_p, n_q)), lam=lam, p0=p0)


@dataclass
class BranchPoint:
    """One converged point of the local bifurcation curve."""

    s: float
    lam: float
    field: HeightField
    residual_norm: float


class Grid:
    """Coefficient tables and spectral matrices for one (flow, N_q, N_p) pair."""

    def __init__(self, flow: LaminarFlow, n_q: int = 64, n_p: int = 129):
        if n_q & (n_q - 1):
            raise DomainError(f"N_q must be a power of two, got {n_q}")
        if n_p % 2 == 0:
            raise DomainError(f"N_p must be odd, got {n_p}")
        self.flow = flow
        self.params = flow.params
        self.n_q = n_q
        self.n_p = n_p
        self.m = n_q // 2 + 1
        self.p = np.linspace(flow.params.p0, 0.0, n_p)
        self.dp = self.p[1] - self.p[0]
        self.q = np.arange(n_q) / n_q
        self.a = flow.a_of(self.p)
        self.Hp = 1.0 / self.a
        from .vorticity import eval_gamma

        self.gamma = np.asarray(eval_gamma(flow.profile, self.p), dtype=float)
        self.Hpp = self.gamma * self.Hp**3
        # Half-grid spectral differentiation matrices (even input, values at
        # the half nodes), built column by column through the FFT.
        self.D1h = np.zeros((self.m, self.m))
        self.D2h = np.zeros((self.m, self.m))
        for j in range(self.m):
            e = np.zeros(self.m)
            e[j] = 1.0
            full = _full_from_half_1d(e)
            self.D1h[:, j] = spectral_deriv(full, 1)[: self.m]
            self.D2h[:, j] = spectral_deriv(full, 2)[: self.m]
        # Weights of the discrete L^2(Omega) inner product.
        wq = np.full(n_q, 1.0 / n_q)
        wp = np.full(n_p, self.dp)
        wp[0] = wp[-1] = 0.5 * self.dp
        self.weight = np.outer(wp, wq)

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        """Trapezoid-in-p, exact-in-q inner product of full-grid arrays."""
        return float(np.sum(self.weight * u * v))

    def kernel_field(self, bif: BifurcationPoint, normalize: bool = True):
        """h* = f_{1,*}(p) cos(2 pi k q) sampled on this grid."""
        if bif.f1_star.interp is not None:
            fvals = bif.f1_star.f_of(self.p)
        else:
            fvals = np.interp(self.p, bif.f1_star.p, bif.f1_star.f)
        w = np.outer(fvals, np.cos(2.0 * np.pi * bif.mode_k * self.q))
        w[0, :] = 0.0
        if normalize:
            w /= np.sqrt(self.inner(w, w))
        return HeightField(w=w, lam=bif.lambda_star, p0=self.params.p0)


def _full_from_half_1d(half: np.ndarray) -> np.ndarray:
    return np.concatenate([half, half[-2:0:-1]])


def _full_from_half(half_rows: np.ndarray) -> np.ndarray:
    return np.concatenate([half_rows, half_rows[:, -2:0:-1]], axis=1)


def _dq(arr: np.ndarray, order: int, parity: str | None = None) -> np.ndarray:
    """Spectral q-derivative along axis 1 of a (rows, N_q) array."""
    n = arr.shape[1]
    spec = np.fft.rfft(arr, axis=1)
    if parity == "even":
        spec = spec.real.astype(complex)
    elif parity == "odd":
        spec = 1j * spec.imag
    k = 2.0 * np.pi * np.arange(n // 2 + 1)
    spec = spec * (1j * k) ** order
    if order % 2 == 1:
        spec[:, -1] = 0.0
    return np.fft.irfft(spec, n, axis=1)


# ----------------------------------------------------------------------------
# residual and linearization
# ----------------------------------------------------------------------------

def _surface_traces(grid: Grid, w_full: np.ndarray, lam: float) -> SurfaceTraces:
    dp = grid.dp
    h0 = w_full[-1]
    hp0 = grid.Hp[-1] + (3.0 * w_full[-1] - 4.0 * w_full[-2] + w_full[-3]) / (2.0 * dp)
    if np.any(hp0 <= 0.0):
        raise DomainError("h_p <= 0 at the surface: left the admissible set")
    # Psi acts on the zero-mean representative; the mean of tr w is driven to
    # zero by the k = 0 component of the boundary residual itself.
    h0_zm = h0 - np.mean(h0)
    return SurfaceTraces(h0=PeriodicEvenFn(h0_zm), hp0=PeriodicEvenFn(hp0), lam=lam)


def _residual_parts(grid: Grid, w_full: np.ndarray, lam: float):
    """Interior F1 on rows 1..N_p-2 and surface F2, both on the full q-grid."""
    dp = grid.dp
    wq = _dq(w_full, 1, parity="even")
    wqq = _dq(w_full, 2, parity="even")
    wp = (w_full[2:] - w_full[:-2]) / (2.0 * dp)
    wpp = (w_full[2:] - 2.0 * w_full[1:-1] + w_full[:-2]) / dp**2
    wpq = _dq(wp, 1, parity="even")

    hp = grid.Hp[1:-1, None] + wp
    if np.any(hp <= 0.0):
        raise DomainError("h_p <= 0 in the interior: left the admissible set")
    A = wq[1:-1]
    E = grid.Hpp[1:-1, None] + wpp
    f1 = (
        (lam**2 + A**2) * E
        - 2.0 * hp * A * wpq
        + hp**2 * wqq[1:-1]
        - lam**2 * grid.gamma[1:-1, None] * hp**3
    )
    traces = _surface_traces(grid, w_full, lam)
    psi = op_Psi(traces, grid.params)
    f2 = w_full[-1] - psi.values
    return f1, f2


def residual_F(field: HeightField, flow: LaminarFlow, params: PhysicalParams,
               grid: Grid | None = None):
    """Residual of the bifurcation operator at a height field.

    Returns the interior residual on rows 1..N_p-2 of the full q-grid and
    the surface residual as a PeriodicEvenFn.
    """
    grid = grid or Grid(flow, n_q=field.n_q, n_p=field.n_p)
    f1, f2 = _residual_parts(grid, field.w, field.lam)
    return f1, PeriodicEvenFn.from_nearly_even(f2)


def apply_LT(direction: HeightField, flow: LaminarFlow, params: PhysicalParams,
             lam: float, grid: Grid | None = None):
    """The explicit linearization (L, T) at the laminar solution.

    L[h] = lam^2 h_pp + H'^2 h_qq - 3 lam^2 gamma H'^2 h_p on interior rows;
    T[h] = tr h - (1 - d_qq)^-1 [tr h - (lam^4/alpha)(S[h] - mean S[h])] with
    S[h] the anchored double integral of tr(a^3 h_p - g h) minus its mean.
    """
    grid = grid or Grid(flow, n_q=direction.n_q, n_p=direction.n_p)
    w = direction.w
    dp = grid.dp
    wqq = _dq(w, 2, parity="even")
    wp = (w[2:] - w[:-2]) / (2.0 * dp)
    wpp = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / dp**2
    Lh = (
        lam**2 * wpp
        + grid.Hp[1:-1, None] ** 2 * wqq[1:-1]
        - 3.0 * lam**2 * grid.gamma[1:-1, None] * grid.Hp[1:-1, None] ** 2 * wp
    )
    h0 = w[-1]
    hp0 = (3.0 * w[-1] - 4.0 * w[-2] + w[-3]) / (2.0 * dp)
    a3_surf = grid.a[-1] ** 3
    inner = a3_surf * hp0 - params.g * h0
    inner = inner - np.mean(a3_surf * hp0)
    s_vals = spectral_antideriv(inner, order=2, parity="even")
    s_vals = s_vals - np.mean(s_vals)
    th = h0 - helmholtz_values(h0 - (lam**4 / params.alpha) * s_vals, parity="even")
    return Lh, PeriodicEvenFn.from_nearly_even(th)


# ----------------------------------------------------------------------------
# mode-by-mode kernel analysis
# ----------------------------------------------------------------------------

def mode_matrix(grid: Grid, lam: float, k: int) -> np.ndarray:
    """Discrete Sturm-Liouville system of cosine mode k, f(p0) eliminated.

    Rows 0..N_p-3: conservative lam^2 (a^3 f')' - (2 k pi)^2 a f at interior
    nodes; last row: the elastic surface condition with a one-sided f'(0).
    """
    n = grid.n_p - 1
    dp = grid.dp
    mu = (2.0 * np.pi * k) ** 2
    a_half = grid.flow.a_of(grid.p[:-1] + 0.5 * dp) ** 3
    mat = np.zeros((n, n))
    for row, i in enumerate(range(1, grid.n_p - 1)):
        am, ap = a_half[i - 1], a_half[i]
        if i - 1 >= 1:
            mat[row, i - 2] = lam**2 * am / dp**2
        mat[row, i - 1] = -lam**2 * (am + ap) / dp**2 - mu * grid.a[i]
        mat[row, i] = lam**2 * ap / dp**2
    a3_surf = grid.a[-1] ** 3
    gl4 = grid.params.g * lam**4 + grid.params.alpha * mu**2
    mat[-1, n - 3] = lam**4 * a3_surf / (2.0 * dp)
    mat[-1, n - 2] = -4.0 * lam**4 * a3_surf / (2.0 * dp)
    mat[-1, n - 1] = 3.0 * lam**4 * a3_surf / (2.0 * dp) - gl4
    return mat


def mode_min_singular_values(grid: Grid, lam: float, k_max: int | None = None):
    """Raw sigma_min of each cosine mode's matrix, k = 1..k_max."""
    k_max = k_max or grid.n_q // 2
    out = np.empty(k_max)
    for k in range(1, k_max + 1):
        svals = np.linalg.svd(mode_matrix(grid, lam, k), compute_uv=False)
        out[k - 1] = svals[-1]
    return out


def kernel_at(lam: float, flow: LaminarFlow, params: PhysicalParams,
              n_q: int = 64, n_p: int = 129):
    """Dimension of the discrete kernel at wavelength lam, and its vector.

    A cosine mode counts as null when its smallest singular value drops
    below the refinement-scaled threshold; for dimension one the
    corresponding singular vector is returned as a HeightField.
    """
    grid = Grid(flow, n_q=n_q, n_p=n_p)
    null_modes = []
    vectors = {}
    for k in range(1, grid.n_q // 2 + 1):
        mat = mode_matrix(grid, lam, k)
        u, svals, vt = np.linalg.svd(mat)
        if svals[-1] < _kernel_threshold(grid, lam, k):
            null_modes.append(k)
            vectors[k] = vt[-1]
    if len(null_modes) != 1:
        return len(null_modes), None
    k = null_modes[0]
    fvec = np.concatenate([[0.0], vectors[k]])
    if fvec[-1] < 0.0:
        fvec = -fvec
    w = np.outer(fvec, np.cos(2.0 * np.pi * k * grid.q))
    field = HeightField(w=w, lam=lam, p0=params.p0)
    return 1, field


# ----------------------------------------------------------------------------
# transversality
# ----------------------------------------------------------------------------

def transversality(flow: LaminarFlow, params: PhysicalParams,
                   bif: BifurcationPoint, n_q: int = 64) -> float:
    """Range functional evaluated on the mixed derivative direction.

    Assembles (F, phi) = d_lam d_h F(lam*, 0)[h*] from the explicit formulas
    (interior part through the shooting samples, surface part through the
    spectral S-pipeline) and evaluates

        int_Omega a^3 h* F + alpha C0 (1 + C0 lam*^2) int phi tr h* dq.

    Negative under the admissibility condition; the closed form
    :func:`transversality_closed_form` must agree.
    """
    lam, mu = bif.lambda_star, bif.C0 * bif.lambda_star**2
    f = bif.f1_star
    a_vals = flow.a_of(f.p)
    # Interior: F = 2 lam a^-3 (a^3 f')' cos = (2 mu / lam) a^-2 f cos, and
    # int_0^1 cos^2 dq = 1/2 exactly.
    int_af2 = simpson(a_vals * f.f**2, x=f.p)
    f_term = (mu / lam) * int_af2

    # Surface: phi = (4 lam^3 / alpha) (1 - d_qq)^-1 [S[h*] - mean S[h*]].
    n = n_q
    q = np.arange(n) / n
    cos_k = np.cos(2.0 * np.pi * bif.mode_k * q)
    a3_surf = flow.a_of(0.0) ** 3
    inner = (a3_surf * f.fp0 - params.g * f.f0) * cos_k
    s_vals = spectral_antideriv(inner, order=2, parity="even")
    s_vals = s_vals - spectral_mean(s_vals)
    phi = (4.0 * lam**3 / params.alpha) * helmholtz_values(s_vals, parity="even")
    phi_term = (
        params.alpha
        * bif.C0
        * (1.0 + bif.C0 * lam**2)
        * spectral_mean(phi * f.f0 * cos_k)
    )
    return float(f_term + phi_term)


def transversality_closed_form(flow: LaminarFlow, params: PhysicalParams,
                               bif: BifurcationPoint) -> float:
    """lam* ((g - alpha C0^2) f*(0)^2 - int a^3 f*'^2 dp)."""
    f = bif.f1_star
    a_vals = flow.a_of(f.p)
    int_a3fp2 = simpson(a_vals**3 * f.fp**2, x=f.p)
    return float(
        bif.lambda_star
        * ((params.g - params.alpha * bif.C0**2) * f.f0**2 - int_a3fp2)
    )


def range_functional(grid: Grid, bif: BifurcationPoint, interior: np.ndarray,
                     boundary: np.ndarray) -> float:
    """int_Omega a^3 h* F + alpha C0 (1 + C0 lam*^2) int phi tr h* dq.

    ``interior`` lives on rows 1..N_p-2 of the full grid, ``boundary`` on the
    surface q-grid; h* is the normalized kernel of the grid.  Vanishes (to
    discretization error) exactly on the range of the linearization.
    """
    hstar = grid.kernel_field(bif, normalize=False)
    a3 = grid.a**3
    full_interior = np.zeros_like(hstar.w)
    full_interior[1:-1] = interior
    term1 = grid.inner(full_interior, a3[:, None] * hstar.w)
    tr_hstar = hstar.w[-1]
    term2 = (
        grid.params.alpha
        * bif.C0
        * (1.0 + bif.C0 * bif.lambda_star**2)
        * spectral_mean(boundary * tr_hstar)
    )
    return float(term1 + term2)


# ----------------------------------------------------------------------------
# Newton solver for the augmented system
# ----------------------------------------------------------------------------

@dataclass
class NewtonResult:
    field: HeightField
    lam: float
    residual_norm: float
    iterations: int


class _AugmentedSystem:
    """Half-grid unknown layout and residual/Jacobian assembly."""

    def __init__(self, grid: Grid, kernel_full: np.ndarray, s: float):
        self.grid = grid
        self.kernel_full = kernel_full
        self.s = s
        self.m = grid.m
        self.rows = grid.n_p - 1  # p-levels 1..N_p-1 carry unknowns
        self.n_unknowns = self.rows * self.m + 1

    # -- packing ------------------------------------------------------------
    def pack(self, w_full: np.ndarray, lam: float) -> np.ndarray:
        x = np.empty(self.n_unknowns)
        x[:-1] = w_full[1:, : self.m].ravel()
        x[-1] = lam
        return x

    def unpack(self, x: np.ndarray):
        half = x[:-1].reshape(self.rows, self.m)
        w_full = np.zeros((self.grid.n_p, self.grid.n_q))
        w_full[1:] = _full_from_half(half)
        return w_full, float(x[-1])

    # -- residual -----------------------------------------------------------
    def residual(self, x: np.ndarray) -> np.ndarray:
        grid = self.grid
        w_full, lam = self.unpack(x)
        f1, f2 = _residual_parts(grid, w_full, lam)
        r = np.empty(self.n_unknowns)
        nf1 = (grid.n_p - 2) * self.m
        r[:nf1] = f1[:, : self.m].ravel()
        r[nf1 : nf1 + self.m] = f2[: self.m]
        r[-1] = grid.inner(w_full, self.kernel_full) - self.s
        return r

    def in_admissible_set(self, x: np.ndarray) -> bool:
        grid = self.grid
        w_full, _ = self.unpack(x)
        dp = grid.dp
        wp = np.empty_like(w_full)
        wp[1:-1] = (w_full[2:] - w_full[:-2]) / (2.0 * dp)
        wp[0] = (-3.0 * w_full[0] + 4.0 * w_full[1] - w_full[2]) / (2.0 * dp)
        wp[-1] = (3.0 * w_full[-1] - 4.0 * w_full[-2] + w_full[-3]) / (2.0 * dp)
        return bool(np.all(grid.Hp[:, None] + wp > 0.0))

    # -- Jacobian -----------------------------------------------------------
    def jacobian(self, x: np.ndarray) -> sp.csc_matrix:
        grid = self.grid
        m, dp = self.m, grid.dp
        w_full, lam = self.unpack(x)
        wq = _dq(w_full, 1)
        wqq = _dq(w_full, 2)
        wp = (w_full[2:] - w_full[:-2]) / (2.0 * dp)
        wpp = (w_full[2:] - 2.0 * w_full[1:-1] + w_full[:-2]) / dp**2
        wpq = _dq(wp, 1)

        hp = grid.Hp[1:-1, None] + wp
        A = wq[1:-1]
        E = grid.Hpp[1:-1, None] + wpp
        gam = grid.gamma[1:-1, None]
        coef_dq = 2.0 * A * E - 2.0 * hp * wpq
        coef_dqq = hp**2
        coef_dpp = lam**2 + A**2
        coef_dp = -2.0 * A * wpq + 2.0 * hp * wqq[1:-1] - 3.0 * lam**2 * gam * hp**2
        coef_dpq = -2.0 * hp * A
        dF1_dlam = 2.0 * lam * E - 2.0 * lam * gam * hp**3

        blocks_i = []
        blocks_j = []
        blocks_v = []

        def add_block(eq_row_level, var_row_level, mat):
            # eq_row_level: 0-based interior equation level (grid row i = level+1)
            # var_row_level: grid row index of the unknown (1..N_p-1)
            r0 = eq_row_level * m
            c0 = (var_row_level - 1) * m
            rr, cc = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
            blocks_i.append((r0 + rr).ravel())
            blocks_j.append((c0 + cc).ravel())
            blocks_v.append(mat.ravel())

        eye = np.eye(m)
        for level in range(grid.n_p - 2):  # interior grid rows i = level + 1
            i = level + 1
            cdq = coef_dq[level, :m]
            cdqq = coef_dqq[level, :m]
            cdpp = coef_dpp[level, :m]
            cdp = coef_dp[level, :m]
            cdpq = coef_dpq[level, :m]
            center = cdq[:, None] * grid.D1h + cdqq[:, None] * grid.D2h \
                - (2.0 / dp**2) * cdpp[:, None] * eye
            up = cdpp[:, None] * eye / dp**2 + cdp[:, None] * eye / (2.0 * dp) \
                + cdpq[:, None] * grid.D1h / (2.0 * dp)
            add_block(level, i, center)
            add_block(level, i + 1, up)
            if i - 1 >= 1:
                down = cdpp[:, None] * eye / dp**2 - cdp[:, None] * eye / (2.0 * dp) \
                    - cdpq[:, None] * grid.D1h / (2.0 * dp)
                add_block(level, i - 1, down)

        nf1 = (grid.n_p - 2) * m
        rows_i = [np.concatenate(blocks_i)]
        cols_j = [np.concatenate(blocks_j)]
        vals_v = [np.concatenate(blocks_v)]

        # lam column of F1.
        rows_i.append(np.arange(nf1))
        cols_j.append(np.full(nf1, self.n_unknowns - 1))
        vals_v.append(dF1_dlam[:, :m].ravel())

        # Surface residual block: centered FD over the three top p-rows + lam.
        eps = _FD_STEP * max(1.0, float(np.max(np.abs(w_full))))

        def f2_of(wf, lv):
            _, f2 = _residual_parts(grid, wf, lv)
            return f2[:m]

        for var_row in (grid.n_p - 3, grid.n_p - 2, grid.n_p - 1):
            for j in range(m):
                wp_ = w_full.copy()
                wp_[var_row, j] += eps
                if j not in (0, grid.n_q // 2):
                    wp_[var_row, grid.n_q - j] += eps
                wm_ = w_full.copy()
                wm_[var_row, j] -= eps
                if j not in (0, grid.n_q // 2):
                    wm_[var_row, grid.n_q - j] -= eps
                col = (f2_of(wp_, lam) - f2_of(wm_, lam)) / (2.0 * eps)
                rows_i.append(nf1 + np.arange(m))
                cols_j.append(np.full(m, (var_row - 1) * m + j))
                vals_v.append(col)
        eps_l = _FD_STEP * max(1.0, lam)
        col = (f2_of(w_full, lam + eps_l) - f2_of(w_full, lam - eps_l)) / (2.0 * eps_l)
        rows_i.append(nf1 + np.arange(m))
        cols_j.append(np.full(m, self.n_unknowns - 1))
        vals_v.append(col)

        # Normalization row: <w, h*> in half coordinates.
        half_weights = np.full(self.m, 2.0 / grid.n_q)
        half_weights[0] = half_weights[-1] = 1.0 / grid.n_q
        wp_row = np.full(grid.n_p, grid.dp)
        wp_row[0] = wp_row[-1] = 0.5 * grid.dp
        norm_row = (
            wp_row[1:, None] * half_weights[None, :] * self.kernel_full[1:, : self.m]
        ).ravel()
        rows_i.append(np.full(self.rows * m, nf1 + m))
        cols_j.append(np.arange(self.rows * m))
        vals_v.append(norm_row)

        jac = sp.coo_matrix(
            (np.concatenate(vals_v), (np.concatenate(rows_i), np.concatenate(cols_j))),
            shape=(self.n_unknowns, self.n_unknowns),
        )
        return jac.tocsc()


def newton_solve(initial: HeightField, lam: float, s: float, kernel: HeightField,
                 flow: LaminarFlow, params: PhysicalParams,
                 tol: float = 1e-10, max_iter: int = 30,
                 grid: Grid | None = None) -> NewtonResult:
    """Solve {F(lam, w) = 0, <w, h*> = s} for (w, lam) by damped Newton.

    The initial field must lie in the admissible set; steps that leave it are
    halved (up to 8 times) before giving up.
    """
    grid = grid or Grid(flow, n_q=initial.n_q, n_p=initial.n_p)
    system = _AugmentedSystem(grid, kernel.w, s)
    x = system.pack(initial.w, lam)
    if not system.in_admissible_set(x):
        raise DomainError("initial field outside the admissible set")
    r = system.residual(x)
    rnorm = float(np.max(np.abs(r)))
    for it in range(1, max_iter + 1):
        if rnorm < tol:
            w_full, lam_out = system.unpack(x)
            field = HeightField(w=w_full, lam=lam_out, p0=params.p0)
            return NewtonResult(field=field, lam=lam_out, residual_norm=rnorm,
                                iterations=it - 1)
        jac = system.jacobian(x)
        try:
            delta = splu(jac).solve(-r)
        except RuntimeError as exc:  # singular factorization
            raise NumericalError(f"Newton linear solve failed: {exc}",
                                 diagnostics={"residual": rnorm, "iter": it})
        step = 1.0
        for _ in range(_MAX_HALVINGS + 1):
            x_new = x + step * delta
            if system.in_admissible_set(x_new):
                try:
                    r_new = system.residual(x_new)
                except DomainError:
                    step *= 0.5
                    continue
                rn = float(np.max(np.abs(r_new)))
                if rn < rnorm or rn < tol:
                    x, r, rnorm = x_new, r_new, rn
                    break
            step *= 0.5
        else:
            raise NumericalError(
                "Newton step rejected after max halvings",
                diagnostics={"residual": rnorm, "iter": it},
            )
    if rnorm < tol:
        w_full, lam_out = system.unpack(x)
        field = HeightField(w=w_full, lam=lam_out, p0=params.p0)
        return NewtonResult(field=field, lam=lam_out, residual_norm=rnorm,
                            iterations=max_iter)
    raise NumericalError(
        f"Newton did not converge: residual {rnorm} after {max_iter} iterations",
        diagnostics={"residual": rnorm},
    )


def continue_branch(bif: BifurcationPoint, s_max: float, n_steps: int,
                    flow: LaminarFlow, params: PhysicalParams,
                    n_q: int = 64, n_p: int = 129, tol: float = 1e-10):
    """March the branch from s = 0 to s_max, warm-starting each solve.

    Returns the list of BranchPoints (the trivial point included).  On a
    Newton failure the branch is truncated at the last converged point and a
    ``truncated`` flag is attached to the list via the second return value.
    """
    grid = Grid(flow, n_q=n_q, n_p=n_p)
    kernel = grid.kernel_field(bif, normalize=True)
    trivial = HeightField.zero(bif.lambda_star, params.p0, n_p, n_q)
    points = [BranchPoint(s=0.0, lam=bif.lambda_star, field=trivial,
                          residual_norm=0.0)]
    if n_steps <= 0 or s_max == 0.0:
        return points, False
    s_values = np.linspace(0.0, s_max, n_steps + 1)[1:]
    w_prev = kernel.w * s_values[0]
    lam_prev = bif.lambda_star
    s_prev = s_values[0]
    for s in s_values:
        w_guess = w_prev * (s / s_prev)
        guess = HeightField(w=w_guess, lam=lam_prev, p0=params.p0)
        try:
            res = newton_solve(guess, lam_prev, s, kernel, flow, params,
                               tol=tol, grid=grid)
        except (NumericalError, DomainError):
            return points, True
        points.append(BranchPoint(s=float(s), lam=res.lam, field=res.field,
                                  residual_norm=res.residual_norm))
        w_prev, lam_prev, s_prev = res.field.w, res.lam, float(s)
    return points, False
