"""Far-field data generation.

Two generators produce the multi-static far-field matrix over a
direction set with observation directions opposite the incident ones
(``obs_j = -theta_j``):

* a small-volume single-scattering model, linear in each scatterer, and
* a Foldy-Lax point-scatterer solver with pairwise multiple scattering,
  used so the imaging stage is not tested on data produced by the model
  it inverts.

Normalization: both emit the constant-free convention, i.e. the scalar
prefactor ``omega**2 * (1+1j) / (4 * sqrt(omega * pi))`` is divided out
of the physical far field.  The subspace imaging downstream is invariant
to any global scalar, so this is purely a bookkeeping convention; it
makes the two models' matrices directly comparable, and for a single
scatterer they agree to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .numerics import DirectionSet, bessel_j0, bessel_y0
from .scene import Scene


class ForwardModelError(RuntimeError):
    """Raised when a forward solve fails (e.g. singular coupling system)."""


def far_field_constant(omega: float) -> complex:
    """The scalar prefactor of the physical far field."""
    return omega**2 * (1.0 + 1.0j) / (4.0 * np.sqrt(omega * np.pi))


@dataclass(frozen=True, eq=False)
class FarFieldSample:
    """One far-field value for an (observation, incidence) direction pair."""

    observation: np.ndarray
    incidence: np.ndarray
    omega: float
    value: complex

    def __post_init__(self):
        obs = np.asarray(self.observation, dtype=float).reshape(2)
        inc = np.asarray(self.incidence, dtype=float).reshape(2)
        for v in (obs, inc):
            if abs(np.hypot(v[0], v[1]) - 1.0) > 1e-12:
                raise ValueError("direction vectors must be unit within 1e-12")
        object.__setattr__(self, "observation", obs)
        object.__setattr__(self, "incidence", inc)


@dataclass(frozen=True, eq=False)
class MsrMatrix:
    """N x N far-field matrix over a direction set at one frequency."""

    entries: np.ndarray
    dirs: DirectionSet
    omega: float

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError("MSR matrix must be square")
        if e.shape[0] != self.dirs.count:
            raise ValueError("MSR dimension must equal the direction count")
        object.__setattr__(self, "entries", e)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def incident_field(x, theta, omega: float) -> complex:
    """Plane wave exp(i omega theta . x); unit modulus by construction."""
    x = np.asarray(x, dtype=float).reshape(2)
    theta = np.asarray(theta, dtype=float).reshape(2)
    return complex(np.exp(1j * omega * (theta @ x)))


def _scatterer_coefficients(scene: Scene):
    """Per-scatterer bracket coefficients of the small-volume model.

    The monopole part is the permittivity contrast times the disk area
    (over sqrt(eps0*mu0)); a dipole part proportional to obs.inc is
    present only for scatterers with permeability contrast.
    """
    eps0 = scene.background.eps
    mu0 = scene.background.mu
    root = np.sqrt(eps0 * mu0)
    coeffs = []
    for sc in scene.all_scatterers():
        mono = (sc.medium.eps - eps0) / root * np.pi
        if sc.medium.mu != mu0:
            dip = mu0 / (sc.medium.mu + mu0) * 2.0
        else:
            dip = 0.0
        coeffs.append((sc.radius**2 * mono, sc.radius**2 * dip))
    return coeffs


def asymptotic_far_field(scene: Scene, obs, inc, omega: float, include_constant: bool = False) -> complex:
    """Small-volume far field for one (observation, incidence) pair.

    Sums r^2 * [monopole - dipole * (sqrt2 obs).(sqrt2 inc)] * phase over
    every scatterer, where the phase is exp(i omega (inc - obs) . center).
    The dipole term appears only for permeability-contrast scatterers;
    the benchmark experiments are purely dielectric and carry none.
    With ``include_constant`` the physical prefactor is multiplied back.
    """
    obs = np.asarray(obs, dtype=float).reshape(2)
    inc = np.asarray(inc, dtype=float).reshape(2)
    if not omega > 0:
        raise ValueError("omega must be positive")
    dot = float(obs @ inc)
    total = 0.0 + 0.0j
    for sc, (mono, dip) in zip(scene.all_scatterers(), _scatterer_coefficients(scene)):
        total += (mono - dip * dot) * np.exp(1j * omega * ((inc - obs) @ sc.center))
    if include_constant:
        total *= far_field_constant(omega)
    return complex(total)


def asymptotic_msr(scene: Scene, dirs: DirectionSet, omega: float) -> MsrMatrix:
    """Small-volume MSR matrix with obs_j = -theta_j (constant-free)."""
    th = dirs.vectors
    n = dirs.count
    entries = np.zeros((n, n), dtype=complex)
    # with obs_j = -theta_j: phase splits into a_j * a_l and obs.inc = -theta_j.theta_l
    dots = th @ th.T
    for sc, (mono, dip) in zip(scene.all_scatterers(), _scatterer_coefficients(scene)):
        a = np.exp(1j * omega * (th @ sc.center))
        entries += (mono + dip * dots) * np.outer(a, a)
    return MsrMatrix(entries=entries, dirs=dirs, omega=omega)


def foldy_lax_far_field(scene: Scene, dirs: DirectionSet, omega: float) -> MsrMatrix:
    """Multiple-scattering MSR matrix for point scatterers.

    Each scatterer p carries the constant-free strength ``b_p =
    (eps_p - eps0) * pi * r_p**2`` and is excited by the incident field
    plus the fields rescattered by all others:

        psi_p = u_inc(c_p) + sum_{q != p} b_q G(c_p, c_q) psi_q,

    with the outgoing 2D Green function G = (i/4) H0^(1)(omega |x-y|).
    The exciting fields solve one dense linear system per frequency
    (shared by all incidence columns), and the far field is re-radiated
    with the same strengths and normalization as :func:`asymptotic_msr`,
    so a lone scatterer reproduces the single-scattering entry exactly.

    One normalization is used throughout: interaction and radiation both
    carry the constant-free amplitudes b_p.  (Scaling the interaction by
    the physical Lippmann-Schwinger factor omega**2 instead drives the
    benchmark configurations into a strongly coupled regime where the
    rescattered fields dominate; here the multiple-scattering content is
    a controlled perturbation of the single-scattering model, which is
    what the data generator is for.)

    Only dielectric contrast is supported; scenes with permeability
    contrast are rejected.

    Raises
    ------
    ForwardModelError
        If the coupling system is singular at this frequency.
    ValueError
        If any scatterer has permeability contrast.
    """
    if not omega > 0:
        raise ValueError("omega must be positive")
    mu0 = scene.background.mu
    scatterers = scene.all_scatterers()
    if any(sc.medium.mu != mu0 for sc in scatterers):
        raise ValueError("the point-scatterer solver supports dielectric contrast only (mu must equal the background)")

    th = dirs.vectors
    n = dirs.count
    if not scatterers:
        return MsrMatrix(entries=np.zeros((n, n), dtype=complex), dirs=dirs, omega=omega)

    eps0 = scene.background.eps
    centers = np.stack([sc.center for sc in scatterers])
    strengths = np.array([sc.coupling(eps0) for sc in scatterers])  # (eps_p - eps0) * pi * r_p^2

    diff = centers[:, None, :] - centers[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    p = len(scatterers)
    green = np.zeros((p, p), dtype=complex)
    off = ~np.eye(p, dtype=bool)
    # off-diagonal distances are positive (scenes forbid overlap), so Y0 is safe
    green[off] = 0.25j * (bessel_j0(omega * dist[off]) + 1j * bessel_y0(omega * dist[off]))
    coupling = np.eye(p, dtype=complex) - green * strengths[None, :]

    # incident phases: U[p, l] = exp(i omega theta_l . c_p)
    u_inc = np.exp(1j * omega * (centers @ th.T))
    try:
        exciting = scipy.linalg.solve(coupling, u_inc)
    except scipy.linalg.LinAlgError as exc:
        raise ForwardModelError(f"singular coupling system at omega={omega}") from exc
    if not np.all(np.isfinite(exciting)):
        raise ForwardModelError(f"coupling solve produced non-finite exciting fields at omega={omega}")

    # K[j, l] = sum_p strengths_p exp(-i omega obs_j . c_p) psi_p^(l), obs_j = -theta_j
    radiate = strengths[:, None] * u_inc  # (p, n)
    entries = radiate.T @ exciting
    return MsrMatrix(entries=entries, dirs=dirs, omega=omega)


def equispaced_wavelengths(count: int = 10, lam_min: float = 0.3, lam_max: float = 0.7) -> np.ndarray:
    """Ascending, equi-spaced wavelengths for multi-frequency runs."""
    if count < 1:
        raise ValueError("need at least one wavelength")
    if count == 1:
        return np.array([lam_min])
    return np.linspace(lam_min, lam_max, count)


# ---------------------------------------------------------------------------
# MSR serialization: CSV ("j,l,re,im") or raw binary, chosen by extension.

def save_msr(msr: MsrMatrix, path) -> None:
    path = str(path)
    if path.endswith(".csv"):
        with open(path, "w") as fh:
            fh.write("j,l,re,im\n")
            e = msr.entries
            for j in range(msr.n):
                for l in range(msr.n):
                    fh.write(f"{j},{l},{float(e[j, l].real)!r},{float(e[j, l].imag)!r}\n")
    else:
        # row-major (re, im) float64 pairs, little-endian
        msr.entries.astype("<c16").tofile(path)


def load_msr_entries(path) -> np.ndarray:
    path = str(path)
    if path.endswith(".csv"):
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        n = int(round(np.sqrt(rows.shape[0])))
        if n * n != rows.shape[0]:
            raise ValueError(f"{path}: expected a square matrix, got {rows.shape[0]} entries")
        entries = np.zeros((n, n), dtype=complex)
        j = rows[:, 0].astype(int)
        l = rows[:, 1].astype(int)
        entries[j, l] = rows[:, 2] + 1j * rows[:, 3]
        return entries
    data = np.fromfile(path, dtype="<c16")
    n = int(round(np.sqrt(data.size)))
    if n * n != data.size:
        raise ValueError(f"{path}: expected a square matrix, got {data.size} entries")
    return data.reshape(n, n).astype(complex)


def load_msr(path, dirs: DirectionSet, omega: float) -> MsrMatrix:
    return MsrMatrix(entries=load_msr_entries(path), dirs=dirs, omega=omega)
