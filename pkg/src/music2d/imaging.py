"""Imaging maps: subspace (MUSIC-type) maps, closed-form predictions, comparison.

The empirical map at a probe point x is the reciprocal noise-space
residual of the unit test vector built from incident plane-wave phases.
Its structure admits a closed-form prediction in terms of J0/J1 sums over
the scatterer centers, implemented here as :func:`theoretical_map`;
:func:`compare_maps` quantifies the agreement away from the singular
center neighborhoods.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import json

import numpy as np

from .numerics import DirectionSet, bessel_j0, bessel_j1
from .scene import Rect, Scene, UNIT_SQUARE
from .spectral import SignalSubspace, project_noise, residual_norms

#: Clamp for reciprocals; the map is unbounded at exact centers otherwise.
DEFAULT_FLOOR = 1e-6


@dataclass(frozen=True)
class GridSpec:
    """Rectangular sampling of a domain, nx columns by ny rows of points."""

    domain: Rect = UNIT_SQUARE
    nx: int = 101
    ny: int = 101

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2 points per axis")

    def xs(self) -> np.ndarray:
        return np.linspace(self.domain.xmin, self.domain.xmax, self.nx)

    def ys(self) -> np.ndarray:
        return np.linspace(self.domain.ymin, self.domain.ymax, self.ny)

    def points(self) -> np.ndarray:
        """All grid points, (nx*ny, 2), x-major order."""
        gx, gy = np.meshgrid(self.xs(), self.ys(), indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])

    def cell_diagonal(self) -> float:
        dx = (self.domain.xmax - self.domain.xmin) / (self.nx - 1)
        dy = (self.domain.ymax - self.domain.ymin) / (self.ny - 1)
        return float(np.hypot(dx, dy))


@dataclass(frozen=True, eq=False)
class ImageGrid:
    """Real-valued map sampled on a :class:`GridSpec`, plus provenance."""

    spec: GridSpec
    values: np.ndarray  # (nx, ny)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.spec.nx, self.spec.ny):
            raise ValueError(f"values shape {v.shape} does not match grid ({self.spec.nx}, {self.spec.ny})")
        if not np.all(np.isfinite(v)):
            raise ValueError("map values must be finite")
        object.__setattr__(self, "values", v)

    def same_grid(self, other: "ImageGrid") -> bool:
        return self.spec == other.spec


def test_vector(x, dirs: DirectionSet, omega: float) -> np.ndarray:
    """Unit test vector of incident phases at x: exp(i w theta_n . x)/sqrt(N)."""
    x = np.asarray(x, dtype=float).reshape(2)
    return np.exp(1j * omega * (dirs.vectors @ x)) / np.sqrt(dirs.count)


def _grid_test_vectors(spec: GridSpec, dirs: DirectionSet, omega: float) -> np.ndarray:
    """Test vectors for all grid points, stacked row-wise: (nx*ny, N)."""
    return np.exp(1j * omega * (spec.points() @ dirs.vectors.T)) / np.sqrt(dirs.count)


def noise_residual_map(sub: SignalSubspace, dirs: DirectionSet, omega: float, spec: GridSpec) -> ImageGrid:
    """Raw residuals |P_noise f(x)| on the grid (no reciprocal, no clamp)."""
    res = residual_norms(sub, _grid_test_vectors(spec, dirs, omega))
    return ImageGrid(
        spec=spec,
        values=res.reshape(spec.nx, spec.ny),
        meta={"kind": "residual", "wavelengths": [2.0 * np.pi / omega], "selection": sub.scheme},
    )


def music_map(sub: SignalSubspace, dirs: DirectionSet, omega: float, spec: GridSpec,
              floor: float = DEFAULT_FLOOR) -> ImageGrid:
    """Subspace imaging map 1 / max(|P_noise f(x)|, floor).

    ``sub`` must come from an MSR built on the same direction set and
    frequency.  With an empty selection the map is constant 1.
    """
    res = residual_norms(sub, _grid_test_vectors(spec, dirs, omega))
    vals = 1.0 / np.maximum(res, floor)
    return ImageGrid(
        spec=spec,
        values=vals.reshape(spec.nx, spec.ny),
        meta={"kind": "music", "wavelengths": [2.0 * np.pi / omega], "selection": sub.scheme, "floor": floor},
    )


def _closed_form_deficit(scene: Scene, spec: GridSpec, omega: float, mode: str) -> np.ndarray:
    """The quantity 1 - sum J0^2 - sum (direction cosines)^2 J1^2 per grid point.

    The direction-cosine factors are kept in their two-component form
    even though they sum to one, so the implementation mirrors the
    closed form term by term; at a center the factors are taken as zero
    (J1 vanishes there anyway).
    """
    if mode == "full":
        centers = scene.centers("all")
    elif mode == "targets_only":
        centers = scene.centers("targets")
    else:
        raise ValueError(f"unknown mode {mode!r}")
    pts = spec.points()
    if centers.shape[0] == 0:
        return np.ones(pts.shape[0])
    diff = pts[:, None, :] - centers[None, :, :]      # (P, C, 2)
    dist = np.hypot(diff[..., 0], diff[..., 1])       # (P, C)
    j0 = bessel_j0(omega * dist)
    j1 = bessel_j1(omega * dist)
    with np.errstate(invalid="ignore", divide="ignore"):
        cosines = np.where(dist[..., None] > 0.0, diff / np.maximum(dist[..., None], np.finfo(float).tiny), 0.0)
    dipole = np.sum(cosines**2, axis=-1) * j1**2      # sum over the two axis components
    return 1.0 - np.sum(j0**2 + dipole, axis=1)


def theoretical_residual_sq_map(scene: Scene, spec: GridSpec, omega: float, mode: str = "full") -> ImageGrid:
    """Closed-form prediction of |P_noise f(x)|^2, unclamped."""
    vals = _closed_form_deficit(scene, spec, omega, mode)
    return ImageGrid(
        spec=spec,
        values=vals.reshape(spec.nx, spec.ny),
        meta={"kind": "theory_residual_sq", "wavelengths": [2.0 * np.pi / omega], "mode": mode},
    )


def theoretical_map(scene: Scene, spec: GridSpec, omega: float, mode: str = "full",
                    floor: float = DEFAULT_FLOOR) -> ImageGrid:
    """Closed-form prediction of the imaging map.

    Evaluates ``(1 - sum_c J0(w|x-c|)^2 - sum_c J1(w|x-c|)^2)**-0.5``
    over the scatterer centers c (targets only in ``targets_only``
    mode), with the parenthesized quantity clamped at ``floor**2`` so
    the value at an exact center is ``1/floor``.
    """
    if not omega > 0:
        raise ValueError("omega must be positive")
    vals = np.clip(_closed_form_deficit(scene, spec, omega, mode), floor**2, None) ** -0.5
    return ImageGrid(
        spec=spec,
        values=vals.reshape(spec.nx, spec.ny),
        meta={"kind": "theory", "wavelengths": [2.0 * np.pi / omega], "mode": mode, "floor": floor},
    )


def multifreq_map(subs, dirs: DirectionSet, omegas, spec: GridSpec,
                  floor: float = DEFAULT_FLOOR) -> ImageGrid:
    """Multi-frequency map: reciprocal norm of the averaged projections.

    For each frequency the full noise-space projection of the test
    vector is materialized; the complex vectors are averaged across
    frequencies entry-wise and only then reduced to a norm, so
    cross-frequency cancellation of artifacts is retained.  With a
    single frequency this coincides with :func:`music_map`.
    """
    omegas = np.asarray(omegas, dtype=float)
    if len(subs) != omegas.size:
        raise ValueError("one subspace per frequency is required")
    if omegas.size == 0:
        raise ValueError("at least one frequency required")
    if np.any(np.diff(omegas) < 0):
        raise ValueError("frequencies must be sorted ascending")
    acc = np.zeros((spec.nx * spec.ny, dirs.count), dtype=complex)
    for sub, omega in zip(subs, omegas):
        acc += project_noise(sub, _grid_test_vectors(spec, dirs, omega))
    acc /= omegas.size
    vals = 1.0 / np.maximum(np.linalg.norm(acc, axis=1), floor)
    return ImageGrid(
        spec=spec,
        values=vals.reshape(spec.nx, spec.ny),
        meta={
            "kind": "music_multifreq",
            "wavelengths": [2.0 * np.pi / w for w in omegas],
            "selection": subs[0].scheme if subs else "",
            "floor": floor,
        },
    )


def exclusion_mask(spec: GridSpec, centers, radius: float) -> np.ndarray:
    """Boolean (nx, ny) mask of points farther than ``radius`` from all centers."""
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    pts = spec.points()
    keep = np.ones(pts.shape[0], dtype=bool)
    for c in centers:
        keep &= np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1]) > radius
    return keep.reshape(spec.nx, spec.ny)


def background_median(grid: ImageGrid, centers, radius: float) -> float:
    """Median map value outside ``radius`` disks around the given centers."""
    mask = exclusion_mask(grid.spec, centers, radius)
    if not mask.any():
        raise ValueError("exclusion radius removes every grid point")
    return float(np.median(grid.values[mask]))


def compare_maps(a: ImageGrid, b: ImageGrid, exclusion_radius: float, centers=()) -> dict:
    """Relative L2 difference and Pearson correlation away from the centers.

    Grid points within ``exclusion_radius`` of any center are dropped
    (those neighborhoods are dominated by the reciprocal clamp).  The
    relative L2 difference is normalized by ``b``.
    """
    if not a.same_grid(b):
        raise ValueError("maps live on different grids")
    mask = exclusion_mask(a.spec, centers, exclusion_radius)
    if not mask.any():
        raise ValueError("exclusion radius removes every grid point")
    va = a.values[mask]
    vb = b.values[mask]
    denom = np.linalg.norm(vb)
    rel_l2 = float(np.linalg.norm(va - vb) / denom) if denom > 0 else float(np.linalg.norm(va - vb))
    da = va - va.mean()
    db = vb - vb.mean()
    na, nb = np.linalg.norm(da), np.linalg.norm(db)
    if na == 0.0 and nb == 0.0:
        correlation = 1.0 if np.allclose(va, vb) else 0.0
    elif na == 0.0 or nb == 0.0:
        correlation = 0.0
    else:
        correlation = float(np.dot(da, db) / (na * nb))
    return {"rel_l2": rel_l2, "correlation": correlation, "points": int(mask.sum())}


# ---------------------------------------------------------------------------
# Export: CSV ("x,y,value", x-major) and binary PGM with a JSON sidecar.

def save_grid_csv(grid: ImageGrid, path) -> None:
    xs, ys = grid.spec.xs(), grid.spec.ys()
    with open(path, "w") as fh:
        fh.write("x,y,value\n")
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                fh.write(f"{float(x)!r},{float(y)!r},{float(grid.values[i, j])!r}\n")


def load_grid_csv(path) -> ImageGrid:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    xs = np.unique(rows[:, 0])
    ys = np.unique(rows[:, 1])
    nx, ny = xs.size, ys.size
    if nx * ny != rows.shape[0]:
        raise ValueError(f"{path}: not a full rectangular grid")
    spec = GridSpec(domain=Rect(xs[0], ys[0], xs[-1], ys[-1]), nx=nx, ny=ny)
    values = rows[:, 2].reshape(nx, ny)
    return ImageGrid(spec=spec, values=values, meta={"kind": "loaded", "source": str(path)})


def save_grid_pgm(grid: ImageGrid, path, bits: int = 16) -> None:
    """Binary (P5) grayscale render after affine normalization to [0, max].

    The normalization constants go to a ``<path>.json`` sidecar so the
    raw values can be recovered up to quantization.  Rows run from the
    top of the domain (max y) downward.
    """
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    maxval = (1 << bits) - 1
    vmin = float(grid.values.min())
    vmax = float(grid.values.max())
    span = vmax - vmin
    if span == 0.0:
        quant = np.zeros_like(grid.values, dtype=np.uint16 if bits == 16 else np.uint8)
    else:
        scaled = np.round((grid.values - vmin) / span * maxval)
        quant = scaled.astype(np.uint16 if bits == 16 else np.uint8)
    raster = quant.T[::-1, :]  # rows = descending y, columns = ascending x
    with open(path, "wb") as fh:
        fh.write(f"P5\n{grid.spec.nx} {grid.spec.ny}\n{maxval}\n".encode("ascii"))
        if bits == 16:
            fh.write(raster.astype(">u2").tobytes())
        else:
            fh.write(raster.astype(np.uint8).tobytes())
    sidecar = {"min": vmin, "max": vmax, "maxval": maxval}
    with open(str(path) + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
