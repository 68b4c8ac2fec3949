"""Direction sets, Bessel functions, and uniform-circle quadrature sums.

Everything here is a pure function.  The Bessel evaluations are backed
by scipy.special, which meets the 1e-10 relative accuracy contract on
|t| <= 1e4; the tests cross-check them against an independent
high-precision oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special as _special


@dataclass(frozen=True, eq=False)
class DirectionSet:
    """Uniform sampling of the unit circle, rows of ``vectors`` are unit."""

    vectors: np.ndarray  # (count, 2)

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise ValueError("direction vectors must have shape (count, 2)")
        norms = np.hypot(v[:, 0], v[:, 1])
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("direction vectors must be unit within 1e-12")
        object.__setattr__(self, "vectors", v)

    @property
    def count(self) -> int:
        return self.vectors.shape[0]


def directions(n: int) -> DirectionSet:
    """N-point uniform direction set, theta_j = -[cos, sin](2*pi*(j-1)/n)."""
    if n < 1:
        raise ValueError("need at least one direction")
    ang = 2.0 * np.pi * np.arange(n) / n
    return DirectionSet(vectors=-np.column_stack([np.cos(ang), np.sin(ang)]))


def bessel_j0(t):
    """J0, Bessel function of the first kind, order zero."""
    return _special.j0(t)


def bessel_j1(t):
    """J1, Bessel function of the first kind, order one."""
    return _special.j1(t)


def bessel_y0(t):
    """Y0, Bessel function of the second kind, order zero (t > 0 only)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("Y0 requires a positive argument")
    out = _special.y0(t)
    return out if out.ndim else float(out)


def bessel_sum_residuals(n: int, omega: float, x, xi) -> tuple:
    """Residuals of the N-point plane-wave sums against their Bessel limits.

    For uniformly sampled directions theta_1..theta_n this returns

    ``r0 = |(1/N) sum_n exp(i w theta_n . x) - J0(w |x|)|``
    ``r1 = |(1/N) sum_n (xi . theta_n) exp(i w theta_n . x) - i (x/|x| . xi) J1(w |x|)|``

    with the second reference term taken as 0 at x = 0.  Both residuals
    collapse spectrally fast once n exceeds roughly ``2 * (w |x| + 10)``.
    """
    x = np.asarray(x, dtype=float).reshape(2)
    xi = np.asarray(xi, dtype=float).reshape(2)
    th = directions(n).vectors
    phases = np.exp(1j * omega * (th @ x))
    s0 = phases.mean()
    s1 = ((th @ xi) * phases).mean()
    r = np.hypot(x[0], x[1])
    ref0 = bessel_j0(omega * r)
    if r == 0.0:
        ref1 = 0.0
    else:
        ref1 = 1j * ((x @ xi) / r) * bessel_j1(omega * r)
    return float(abs(s0 - ref0)), float(abs(s1 - ref1))


def dipole_quadrature(n: int, xi) -> float:
    """(1/N) sum_n (theta_n . xi)^2 over the uniform direction set.

    Exactly 1/2 for any unit xi once n >= 3 (the integrand is a degree-2
    trigonometric polynomial, integrated exactly by the uniform rule).
    """
    xi = np.asarray(xi, dtype=float).reshape(2)
    th = directions(n).vectors
    return float(np.mean((th @ xi) ** 2))
