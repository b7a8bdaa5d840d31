"""Plate operator, nonlocal boundary operators and periodic spectral calculus.

Functions of the rescaled horizontal variable q live on N uniform points
q_j = j/N of [0, 1), N a power of two.  Everything here is built for the even
subspace: an even 1-periodic function is determined by its cosine
coefficients, its derivative is odd (sine data), and repeated q-integrations
are exact divisions in coefficient space.  Antiderivatives of zero-mean data
are anchored so the value at q = 0 vanishes, matching the int_0^q integrals
in the operator definitions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .laminar import PhysicalParams

_EVEN_TOL = 1e-13


# ----------------------------------------------------------------------------
# low-level spectral helpers on full-grid sample arrays
# ----------------------------------------------------------------------------

def _wavenumbers(n: int) -> np.ndarray:
    """Angular wavenumbers 2 pi k for rfft layout on n samples of [0, 1)."""
    return 2.0 * np.pi * np.arange(n // 2 + 1)


def _project(spec: np.ndarray, parity: str | None) -> np.ndarray:
    """Drop the spectrum components a declared parity cannot have.

    Even samples have a purely real rfft, odd samples a purely imaginary
    one; projecting before differentiating keeps parity exact in floating
    point instead of letting rounding noise get amplified by high powers of
    the wavenumber.
    """
    if parity == "even":
        return spec.real.astype(complex)
    if parity == "odd":
        return 1j * spec.imag
    return spec


def spectral_deriv(values: np.ndarray, order: int = 1,
                   parity: str | None = None,
                   denoise: float | None = None) -> np.ndarray:
    """Spectral q-derivative of 1-periodic samples.

    ``parity`` declares the symmetry of the *input* ('even'/'odd'); the
    Nyquist mode is zeroed for odd orders (its derivative vanishes at the
    nodes anyway).  ``denoise`` zeros spectrum entries below that fraction
    of the largest one before multiplying by (i k)^order: transform rounding
    sits at the eps floor and would otherwise be amplified by k^order.
    """
    n = len(values)
    spec = _project(np.fft.rfft(values), parity)
    if denoise is not None:
        spec[np.abs(spec) < denoise * max(float(np.max(np.abs(spec))), 1e-300)] = 0.0
    k = _wavenumbers(n)
    spec = spec * (1j * k) ** order
    if order % 2 == 1:
        spec[-1] = 0.0
    return np.fft.irfft(spec, n)


def spectral_antideriv(values: np.ndarray, order: int = 1,
                       parity: str | None = None) -> np.ndarray:
    """Iterated antiderivative of zero-mean samples, anchored to 0 at q = 0."""
    n = len(values)
    spec = _project(np.fft.rfft(values), parity)
    if abs(spec[0]) > 1e-10 * n * max(1.0, float(np.max(np.abs(values)))):
        raise DomainError("antiderivative requires zero-mean input")
    k = _wavenumbers(n)
    for _ in range(order):
        spec[0] = 0.0
        spec[1:] = spec[1:] / (1j * k[1:])
    vals = np.fft.irfft(spec, n)
    return vals - vals[0]


def spectral_mean(values: np.ndarray) -> float:
    return float(np.mean(values))


def helmholtz_values(values: np.ndarray, parity: str | None = None) -> np.ndarray:
    """Apply (1 - d_qq)^-1 in coefficient space."""
    n = len(values)
    spec = _project(np.fft.rfft(values), parity)
    spec = spec / (1.0 + _wavenumbers(n) ** 2)
    return np.fft.irfft(spec, n)


# ----------------------------------------------------------------------------
# even periodic functions
# ----------------------------------------------------------------------------

@dataclass
class PeriodicEvenFn:
    """Samples of an even 1-periodic function at q_j = j/N, N a power of two."""

    values: np.ndarray
    accuracy_warning: bool = field(default=False, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n = len(self.values)
        if n < 4 or n & (n - 1):
            raise DomainError(f"sample count must be a power of two >= 4, got {n}")
        mirrored = np.roll(self.values[::-1], 1)  # mirrored[j] = v[(N - j) mod N]
        scale = max(1.0, float(np.max(np.abs(self.values))))
        defect = float(np.max(np.abs(self.values - mirrored)))
        if defect > _EVEN_TOL * scale:
            raise DomainError(f"samples are not even: defect {defect}")

    def __len__(self):
        return len(self.values)

    @classmethod
    def from_half(cls, half) -> "PeriodicEvenFn":
        """Build from values on j = 0..N/2 (the other half is mirrored)."""
        half = np.asarray(half, dtype=float)
        return cls(np.concatenate([half, half[-2:0:-1]]))

    @classmethod
    def from_nearly_even(cls, values, rel_tol: float = 1e-10) -> "PeriodicEvenFn":
        """Symmetrize float-level parity noise; reject genuine asymmetry.

        Spectral round trips leave O(eps)-amplified asymmetries in data that
        is even in exact arithmetic; those are folded away here.  A defect
        above ``rel_tol`` (relative to the max value) is a real parity bug
        and raises.
        """
        values = np.asarray(values, dtype=float)
        n = len(values)
        mirrored = np.roll(values[::-1], 1)
        scale = max(1.0, float(np.max(np.abs(values))))
        defect = float(np.max(np.abs(values - mirrored)))
        if defect > rel_tol * scale:
            raise DomainError(f"samples are not even: defect {defect}")
        return cls.from_half(0.5 * (values + mirrored)[: n // 2 + 1])

    @classmethod
    def from_coeffs(cls, coeffs, n: int) -> "PeriodicEvenFn":
        """Build from cosine coefficients c_k, f(q) = sum c_k cos(2 pi k q)."""
        c = np.asarray(coeffs, dtype=float)
        if len(c) > n // 2 + 1:
            raise DomainError("too many cosine coefficients for resolution")
        spec = np.zeros(n // 2 + 1)
        spec[: len(c)] = c * (n / 2.0)
        spec[0] = c[0] * n
        if len(c) == n // 2 + 1:
            spec[-1] = c[-1] * n
        return cls(np.fft.irfft(spec, n))

    @classmethod
    def from_callable(cls, fn, n: int) -> "PeriodicEvenFn":
        q = np.arange(n // 2 + 1) / n
        return cls.from_half(fn(q))

    @classmethod
    def zeros(cls, n: int) -> "PeriodicEvenFn":
        return cls(np.zeros(n))

    @property
    def coeffs(self) -> np.ndarray:
        """Cosine coefficients c_k with f(q) = sum c_k cos(2 pi k q)."""
        n = len(self.values)
        spec = np.fft.rfft(self.values).real
        c = 2.0 * spec / n
        c[0] = spec[0] / n
        c[-1] = spec[-1] / n
        return c

    def mean(self) -> float:
        return spectral_mean(self.values)

    def deriv(self, order: int = 1) -> np.ndarray:
        """Sample array of the order-th q-derivative (odd data for odd order)."""
        return spectral_deriv(self.values, order, parity="even")

    def __call__(self, q):
        """Evaluate anywhere by cosine synthesis."""
        c = self.coeffs
        k = np.arange(len(c))
        q_arr = np.atleast_1d(np.asarray(q, dtype=float))
        out = np.cos(2.0 * np.pi * np.outer(q_arr, k)) @ c
        return out if np.ndim(q) else float(out[0])


@dataclass
class SurfaceTraces:
    """Trace data of a height function at p = 0: tr h, its q-derivative, tr h_p."""

    h0: PeriodicEvenFn
    hp0: PeriodicEvenFn
    lam: float
    h0_q: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.lam <= 0.0:
            raise DomainError(f"lam must be positive, got {self.lam}")
        scale = max(1.0, float(np.max(np.abs(self.h0.values))))
        if abs(self.h0.mean()) > 1e-11 * scale:
            raise DomainError("tr_0 h must have zero mean")
        if self.h0_q is None:
            self.h0_q = self.h0.deriv(1)


# ----------------------------------------------------------------------------
# operators
# ----------------------------------------------------------------------------

def omega_of(slope) -> np.ndarray:
    """omega = (1 + slope^2)^(1/2), pointwise."""
    return np.sqrt(1.0 + np.asarray(slope, dtype=float) ** 2)


def plate_H(zeta: PeriodicEvenFn) -> PeriodicEvenFn:
    """Bending operator of the elastic plate, acting in the q variable.

    H(zeta) = w^-1 [w^-1 (w^-3 zeta'')']' + (w^-3 zeta'')^3 / 2 with
    w = omega(zeta'); derivatives spectral, nonlinearities pointwise.  The
    result carries ``accuracy_warning`` when the spectral tail of zeta
    exceeds 1e-10 of its largest coefficient.
    """
    c = zeta.coeffs
    tail = float(np.max(np.abs(c[-2:])))
    top = float(np.max(np.abs(c)))
    unresolved = top > 0.0 and tail > 1e-10 * top
    # Transform rounding would be amplified by k^4 through the nested
    # derivative passes; each pass drops its eps-floor modes first.
    floor = 1e-14
    zq = spectral_deriv(zeta.values, 1, parity="even", denoise=floor)
    zqq = spectral_deriv(zeta.values, 2, parity="even", denoise=floor)
    w = omega_of(zq)
    inner = zqq / w**3
    step = spectral_deriv(inner, parity="even", denoise=floor) / w
    bend = spectral_deriv(step, parity="odd", denoise=floor) / w
    out = PeriodicEvenFn.from_nearly_even(bend + 0.5 * inner**3)
    out.accuracy_warning = unresolved
    return out


def helmholtz_inv(f: PeriodicEvenFn) -> PeriodicEvenFn:
    """(1 - d_qq)^-1 on zero-mean even data; output has zero mean."""
    scale = max(1.0, float(np.max(np.abs(f.values))))
    if abs(f.mean()) > 1e-12 * scale:
        raise DomainError(f"helmholtz_inv requires zero mean, got {f.mean()}")
    out = helmholtz_values(f.values, parity="even")
    spec = np.fft.rfft(out)
    spec[0] = 0.0
    return PeriodicEvenFn.from_nearly_even(np.fft.irfft(spec, len(out)))


def _surface_quotient(traces: SurfaceTraces) -> np.ndarray:
    """(lam^2 + h_q^2) / h_p^2 at the surface; requires h_p > 0."""
    hp = traces.hp0.values
    if np.any(hp <= 0.0):
        raise DomainError("h_p must be positive at the surface (no stagnation)")
    return (traces.lam**2 + traces.h0_q**2) / hp**2


def op_B(traces: SurfaceTraces, params: PhysicalParams) -> PeriodicEvenFn:
    """Second trace of the dynamic boundary condition, normalized to zero mean.

    B = (lam / 2 alpha) [ mean_q tr((lam^2 + h_q^2)/h_p^2)
                          - tr((lam^2 + h_q^2)/h_p^2 + 2 g lam^2 h) ].
    """
    lam = traces.lam
    quot = _surface_quotient(traces)
    vals = (lam / (2.0 * params.alpha)) * (
        spectral_mean(quot) - quot - 2.0 * params.g * lam**2 * traces.h0.values
    )
    # Project out the k = 0 coefficient so the mean is exactly zero.
    spec = np.fft.rfft(vals)
    spec[0] = 0.0
    return PeriodicEvenFn.from_nearly_even(np.fft.irfft(spec, len(vals)))


def op_Phi(traces: SurfaceTraces, params: PhysicalParams) -> PeriodicEvenFn:
    """Twice-integrated boundary data plus the plate's cubic correction.

    Phi(q) = int_0^q int_0^x B ds dx
             - (5/2) int_0^q zeta' (zeta'')^2 omega^-7(zeta') dx,
    with zeta = tr h / lam; both integrals anchored to vanish at q = 0.
    """
    b = op_B(traces, params)
    double = spectral_antideriv(b.values, order=2, parity="even")
    zeta_vals = traces.h0.values / traces.lam
    zq = spectral_deriv(zeta_vals, 1, parity="even")
    zqq = spectral_deriv(zeta_vals, 2, parity="even")
    corr_integrand = zq * zqq**2 / omega_of(zq) ** 7
    corr = spectral_antideriv(corr_integrand, order=1, parity="odd")
    return PeriodicEvenFn.from_nearly_even(double - 2.5 * corr)


def op_Psi(traces: SurfaceTraces, params: PhysicalParams) -> PeriodicEvenFn:
    """The compact boundary operator replacing the fourth-order plate condition.

    Psi = (1 - d_qq)^-1 [ lam w5 (int w5)^-1 int w5 Phi + tr h - lam w5 Phi ]
    with w5 = omega^5(zeta'), zeta = tr h / lam.  Output is even with zero
    mean; h = Psi(lam, h) at p = 0 is equivalent to the dynamic condition.
    """
    lam = traces.lam
    phi = op_Phi(traces, params).values
    zq = spectral_deriv(traces.h0.values / lam, 1, parity="even")
    w5 = omega_of(zq) ** 5
    c = spectral_mean(w5 * phi) / spectral_mean(w5)
    arg = lam * w5 * c + traces.h0.values - lam * w5 * phi
    return helmholtz_inv(PeriodicEvenFn.from_nearly_even(arg))


def laminar_traces(flow, lam: float, n: int) -> SurfaceTraces:
    """Traces of the laminar solution itself: tr h = 0, tr h_p = H'(0)."""
    hp_surface = float(flow.Hp_of(0.0))
    return SurfaceTraces(
        h0=PeriodicEvenFn.zeros(n),
        hp0=PeriodicEvenFn(np.full(n, hp_surface)),
        lam=lam,
    )


def to_csv(fn: PeriodicEvenFn, path) -> None:
    """Debug dump: columns q,value with 17 significant digits."""
    import csv

    n = len(fn)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["q", "value"])
        for j, v in enumerate(fn.values):
            writer.writerow([f"{j / n:.17g}", f"{v:.17g}"])
