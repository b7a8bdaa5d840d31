"""Vorticity profiles gamma on [p0, 0] and their antiderivative Gamma.

A profile is one of three kinds:

* ``zero``       -- gamma == 0 (irrotational flow),
* ``constant``   -- gamma == gamma0,
* ``tabulated``  -- monotone-cubic (PCHIP) interpolant through (p, gamma)
  samples; C^1 on [p0, 0], which keeps downstream ODE coefficients smooth.

Gamma(p) = integral of gamma from p0 to p is evaluated exactly: linearly for
the closed-form kinds and through the interpolant's antiderivative for
tabulated data, so Gamma(p0) == 0 holds to the last bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DomainError

# Sampling density for locating max Gamma, then golden-section refinement.
_MAX_GAMMA_SAMPLES = 2048


@dataclass(frozen=True)
class VorticityProfile:
    """Vorticity function gamma on [p0, 0].

    Use the constructors :meth:`zero`, :meth:`constant`, :meth:`tabulated`
    or :meth:`from_csv` rather than calling the dataclass directly.
    """

    kind: str
    p0: float
    gamma0: float = 0.0
    p_samples: np.ndarray | None = None
    gamma_samples: np.ndarray | None = None
    _interp: PchipInterpolator | None = field(default=None, repr=False, compare=False)
    _interp_anti: PchipInterpolator | None = field(default=None, repr=False, compare=False)

    @classmethod
    def zero(cls, p0: float) -> "VorticityProfile":
        _check_p0(p0)
        return cls(kind="zero", p0=float(p0))

    @classmethod
    def constant(cls, gamma0: float, p0: float) -> "VorticityProfile":
        _check_p0(p0)
        return cls(kind="constant", p0=float(p0), gamma0=float(gamma0))

    @classmethod
    def tabulated(cls, p_samples, gamma_samples) -> "VorticityProfile":
        p = np.asarray(p_samples, dtype=float)
        g = np.asarray(gamma_samples, dtype=float)
        if p.ndim != 1 or p.shape != g.shape or p.size < 2:
            raise DomainError("tabulated profile needs matching 1-d p and gamma arrays")
        if np.any(np.diff(p) <= 0.0):
            raise DomainError("tabulated p samples must be strictly increasing")
        if p[-1] != 0.0:
            raise DomainError(f"tabulated samples must end at p=0, got {p[-1]}")
        _check_p0(p[0])
        interp = PchipInterpolator(p, g, extrapolate=False)
        return cls(
            kind="tabulated",
            p0=float(p[0]),
            p_samples=p,
            gamma_samples=g,
            _interp=interp,
            _interp_anti=interp.antiderivative(),
        )

    @classmethod
    def from_csv(cls, path) -> "VorticityProfile":
        """Load a tabulated profile from a two-column CSV with header ``p,gamma``."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [c.strip().lower() for c in header[:2]] != ["p", "gamma"]:
                raise DomainError(f"expected header 'p,gamma' in {path}, got {header}")
            rows = [(float(r[0]), float(r[1])) for r in reader if r]
        p = np.array([r[0] for r in rows])
        g = np.array([r[1] for r in rows])
        return cls.tabulated(p, g)


def _check_p0(p0: float) -> None:
    if not p0 < 0.0:
        raise DomainError(f"p0 must be negative, got {p0}")


def _check_in_domain(profile: VorticityProfile, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(p < profile.p0 - 1e-14) or np.any(p > 1e-14):
        raise DomainError(f"p={p} outside [{profile.p0}, 0]")
    return np.clip(p, profile.p0, 0.0)


def eval_gamma(profile: VorticityProfile, p):
    """Evaluate gamma(p) for p in [p0, 0]."""
    p = _check_in_domain(profile, p)
    if profile.kind == "zero":
        return np.zeros_like(p) if p.ndim else 0.0
    if profile.kind == "constant":
        return np.full_like(p, profile.gamma0) if p.ndim else profile.gamma0
    out = profile._interp(p)
    return out if p.ndim else float(out)


def eval_Gamma(profile: VorticityProfile, p):
    """Evaluate Gamma(p) = int_{p0}^p gamma(s) ds; Gamma(p0) == 0 exactly."""
    p = _check_in_domain(profile, p)
    if profile.kind == "zero":
        return np.zeros_like(p) if p.ndim else 0.0
    if profile.kind == "constant":
        out = profile.gamma0 * (p - profile.p0)
        return out if p.ndim else float(out)
    anti = profile._interp_anti
    out = anti(p) - anti(profile.p0)
    return out if p.ndim else float(out)


def max_Gamma(profile: VorticityProfile) -> float:
    """Maximum of Gamma over [p0, 0].

    Dense sampling (2048 points) followed by golden-section refinement of the
    bracketing interval, so the result is deterministic.
    """
    if profile.kind == "zero":
        return 0.0
    if profile.kind == "constant":
        # Gamma is linear: extremum at an endpoint.
        return max(0.0, float(profile.gamma0 * (0.0 - profile.p0)))
    ps = np.linspace(profile.p0, 0.0, _MAX_GAMMA_SAMPLES)
    vals = eval_Gamma(profile, ps)
    i = int(np.argmax(vals))
    best = float(vals[i])
    lo = ps[max(i - 1, 0)]
    hi = ps[min(i + 1, len(ps) - 1)]
    best = max(best, _golden_max(lambda p: float(eval_Gamma(profile, p)), lo, hi))
    return best


_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def _golden_max(fn, lo: float, hi: float, tol: float = 1e-12) -> float:
    """Golden-section search for the maximum of fn on [lo, hi]."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fn(c), fn(d)
    best = max(fn(a), fn(b), fc, fd)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fn(d)
        best = max(best, fc, fd)
    return best
