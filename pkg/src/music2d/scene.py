"""Physical configuration: target disks, random clutter, background medium.

A :class:`Scene` is immutable after construction and owns its validity:
all scatterer centers lie strictly inside the domain rectangle and no two
scatterers overlap.  Random clutter is produced by seeded rejection
sampling (numpy ``default_rng``, i.e. PCG64), so identical seeds give
bit-identical scenes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

KIND_INHOMOGENEITY = "inhomogeneity"
KIND_RANDOM = "random"

#: Seed used by the stock benchmark scene and the CLI when none is given.
DEFAULT_SEED = 1

# rejection-sampling attempt budget per requested scatterer
_ATTEMPTS_PER_SCATTERER = 1000


class PlacementError(RuntimeError):
    """Rejection sampling ran out of attempts (domain too crowded)."""


@dataclass(frozen=True)
class Medium:
    """Homogeneous material, relative permittivity and permeability."""

    eps: float
    mu: float

    def __post_init__(self):
        if not (self.eps > 0 and self.mu > 0):
            raise ValueError(f"permittivity and permeability must be positive, got eps={self.eps}, mu={self.mu}")


#: Free-space background.
VACUUM = Medium(eps=1.0, mu=1.0)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [xmin, xmax] x [ymin, ymax]."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("rectangle must have positive extent")

    def contains(self, point, strict: bool = True) -> bool:
        x, y = float(point[0]), float(point[1])
        if strict:
            return self.xmin < x < self.xmax and self.ymin < y < self.ymax
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax


#: The [-1, 1]^2 square used by the stock experiments.
UNIT_SQUARE = Rect(-1.0, -1.0, 1.0, 1.0)


@dataclass(frozen=True, eq=False)
class Scatterer:
    """Small disk scatterer.

    The reference domain is the unit disk, so the area factor is pi and
    the polarization area is ``pi * radius**2``.
    """

    center: np.ndarray
    radius: float
    medium: Medium
    kind: str = KIND_INHOMOGENEITY

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(2))
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.kind not in (KIND_INHOMOGENEITY, KIND_RANDOM):
            raise ValueError(f"unknown scatterer kind {self.kind!r}")

    def coupling(self, eps_background: float = 1.0) -> float:
        """Dielectric coupling strength (eps contrast times disk area)."""
        return (self.medium.eps - eps_background) * np.pi * self.radius**2


@dataclass(frozen=True, eq=False)
class Scene:
    """Background medium plus targets (inhomogeneities) and random clutter."""

    background: Medium = VACUUM
    inhomogeneities: tuple = ()
    randoms: tuple = ()
    domain: Rect = UNIT_SQUARE

    def __post_init__(self):
        object.__setattr__(self, "inhomogeneities", tuple(self.inhomogeneities))
        object.__setattr__(self, "randoms", tuple(self.randoms))
        for sc in self.all_scatterers():
            if not self.domain.contains(sc.center):
                raise ValueError(f"scatterer center {sc.center} lies outside the domain {self.domain}")
        bad = _overlapping_pairs(self.all_scatterers())
        if bad:
            i, j = bad[0]
            raise ValueError(f"scatterers {i} and {j} overlap")

    def all_scatterers(self) -> tuple:
        return self.inhomogeneities + self.randoms

    @property
    def n_targets(self) -> int:
        return len(self.inhomogeneities)

    @property
    def n_randoms(self) -> int:
        return len(self.randoms)

    def centers(self, which: str = "all") -> np.ndarray:
        """Stacked (n, 2) centers of ``"targets"``, ``"randoms"`` or ``"all"``."""
        groups = {
            "targets": self.inhomogeneities,
            "randoms": self.randoms,
            "all": self.all_scatterers(),
        }
        items = groups[which]
        if not items:
            return np.zeros((0, 2))
        return np.stack([sc.center for sc in items])


def _overlapping_pairs(scatterers) -> list:
    pairs = []
    for i in range(len(scatterers)):
        for j in range(i + 1, len(scatterers)):
            a, b = scatterers[i], scatterers[j]
            if np.hypot(*(a.center - b.center)) <= a.radius + b.radius:
                pairs.append((i, j))
    return pairs


def validate_separation(scene: Scene, omega: float) -> list:
    """Report target pairs that violate the resolution-separation bound.

    Returns every pair ``(i, j)`` of inhomogeneity indices with
    ``omega * |z_i - z_j| <= 0.75``; an empty list means all pairs are
    well separated at this frequency.
    """
    if not omega > 0:
        raise ValueError("omega must be positive")
    violations = []
    centers = scene.centers("targets")
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            if omega * np.hypot(*(centers[i] - centers[j])) <= 0.75:
                violations.append((i, j))
    return violations


def oversized_scatterers(scene: Scene, omega: float) -> list:
    """Indices (into ``scene.all_scatterers()``) with radius > lambda/4.

    The small-volume data model degrades for such radii; callers should
    warn but not reject.
    """
    lam = 2.0 * np.pi / omega
    return [i for i, sc in enumerate(scene.all_scatterers()) if sc.radius > lam / 4.0]


def clutter_coupling_ratio(scene: Scene) -> float:
    """Max clutter coupling over min target coupling.

    Values near or above one mean the random scatterers are about as
    strong as the targets, so their singular values may not be
    separable from the targets'.  Returns 0.0 when either group is
    empty.
    """
    if not scene.inhomogeneities or not scene.randoms:
        return 0.0
    eps0 = scene.background.eps
    strongest_clutter = max(abs(sc.coupling(eps0)) for sc in scene.randoms)
    weakest_target = min(abs(sc.coupling(eps0)) for sc in scene.inhomogeneities)
    if weakest_target == 0.0:
        return float("inf")
    return strongest_clutter / weakest_target


def generate_randoms(seed, count, domain=UNIT_SQUARE, radius=0.05, eps_range=(1.0, 2.0), avoid=()):
    """Draw ``count`` non-overlapping random scatterers.

    Centers are uniform in ``domain`` and permittivities uniform in
    ``eps_range``; each attempt draws (x, y, eps) in that order from a
    PCG64 stream seeded with ``seed``, so results are reproducible.
    Draws that overlap an already placed scatterer or anything in
    ``avoid`` are rejected and resampled.

    Raises
    ------
    PlacementError
        If the attempt budget (1000 per scatterer) is exhausted.
    ValueError
        If ``count`` is negative or ``eps_range`` dips below 1.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    lo, hi = float(eps_range[0]), float(eps_range[1])
    if lo < 1.0:
        raise ValueError("random permittivities must not be below the background (eps_range[0] >= 1)")
    if hi < lo:
        raise ValueError("eps_range must be ordered")

    rng = np.random.default_rng(seed)
    placed = []
    obstacles = list(avoid)
    budget = _ATTEMPTS_PER_SCATTERER * count
    attempts = 0
    while len(placed) < count:
        if attempts >= budget:
            raise PlacementError(
                f"placed only {len(placed)} of {count} scatterers after {budget} attempts"
            )
        attempts += 1
        x = rng.uniform(domain.xmin, domain.xmax)
        y = rng.uniform(domain.ymin, domain.ymax)
        eps = rng.uniform(lo, hi)
        center = np.array([x, y])
        if any(np.hypot(*(center - o.center)) <= radius + o.radius for o in obstacles):
            continue
        sc = Scatterer(center=center, radius=radius, medium=Medium(eps=eps, mu=1.0), kind=KIND_RANDOM)
        placed.append(sc)
        obstacles.append(sc)
    return placed


def reference_scene(seed=DEFAULT_SEED) -> Scene:
    """The stock benchmark: three dielectric targets among 100 clutter disks.

    Targets sit at (0.25, 0), (-0.4, 0.5) and (-0.3, -0.7) with radius
    0.1 and permittivity 3; the clutter has radius 0.05 and permittivity
    uniform in [1, 2], placed by :func:`generate_randoms` on the same
    seed.
    """
    target_medium = Medium(eps=3.0, mu=1.0)
    targets = tuple(
        Scatterer(center=np.array(z), radius=0.1, medium=target_medium, kind=KIND_INHOMOGENEITY)
        for z in ([0.25, 0.0], [-0.4, 0.5], [-0.3, -0.7])
    )
    randoms = generate_randoms(
        seed=seed, count=100, domain=UNIT_SQUARE, radius=0.05, eps_range=(1.0, 2.0), avoid=targets
    )
    return Scene(background=VACUUM, inhomogeneities=targets, randoms=tuple(randoms), domain=UNIT_SQUARE)


# ---------------------------------------------------------------------------
# JSON serialization (field names are part of the file contract)

def _scatterer_to_dict(sc: Scatterer) -> dict:
    return {
        "center": [float(sc.center[0]), float(sc.center[1])],
        "radius": float(sc.radius),
        "eps": float(sc.medium.eps),
        "mu": float(sc.medium.mu),
    }


def _scatterer_from_dict(d: dict, kind: str) -> Scatterer:
    return Scatterer(
        center=np.asarray(d["center"], dtype=float),
        radius=float(d["radius"]),
        medium=Medium(eps=float(d["eps"]), mu=float(d["mu"])),
        kind=kind,
    )


def scene_to_dict(scene: Scene) -> dict:
    return {
        "background": {"eps": float(scene.background.eps), "mu": float(scene.background.mu)},
        "inhomogeneities": [_scatterer_to_dict(sc) for sc in scene.inhomogeneities],
        "randoms": [_scatterer_to_dict(sc) for sc in scene.randoms],
        "domain": {
            "min": [float(scene.domain.xmin), float(scene.domain.ymin)],
            "max": [float(scene.domain.xmax), float(scene.domain.ymax)],
        },
    }


def scene_from_dict(d: dict) -> Scene:
    dom = d["domain"]
    return Scene(
        background=Medium(eps=float(d["background"]["eps"]), mu=float(d["background"]["mu"])),
        inhomogeneities=tuple(_scatterer_from_dict(s, KIND_INHOMOGENEITY) for s in d["inhomogeneities"]),
        randoms=tuple(_scatterer_from_dict(s, KIND_RANDOM) for s in d["randoms"]),
        domain=Rect(float(dom["min"][0]), float(dom["min"][1]), float(dom["max"][0]), float(dom["max"][1])),
    )


def save_scene(scene: Scene, path) -> None:
    with open(path, "w") as fh:
        json.dump(scene_to_dict(scene), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_scene(path) -> Scene:
    with open(path) as fh:
        return scene_from_dict(json.load(fh))
