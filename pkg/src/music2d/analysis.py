"""Peak extraction and localization scoring for imaging maps."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .imaging import ImageGrid


@dataclass(frozen=True, eq=False)
class Peak:
    location: np.ndarray  # (2,)
    value: float


@dataclass(frozen=True, eq=False)
class PeakReport:
    """Peaks, greedy truth/peak matches, and the truths left unmatched."""

    peaks: tuple        # Peak, sorted by descending value
    matches: tuple      # (truth, found, distance)
    unmatched_truths: tuple


def find_peaks(grid: ImageGrid, k: int, min_separation: float) -> list:
    """The k highest local maxima, greedily thinned by separation.

    A point is a local maximum when no existing 8-neighbor exceeds it
    and at least one is strictly below (so constant maps yield none,
    while exact ties at a summit survive and are thinned by the
    separation rule).  Candidates are taken in descending value; one is
    kept only if it lies at least ``min_separation`` from every peak
    already kept.  Returns fewer than k peaks when the map does not
    have them.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    v = grid.values
    padded = np.full((v.shape[0] + 2, v.shape[1] + 2), -np.inf)
    padded[1:-1, 1:-1] = v
    is_max = np.ones_like(v, dtype=bool)
    strictly_above = np.zeros_like(v, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            neighbor = padded[1 + di : 1 + di + v.shape[0], 1 + dj : 1 + dj + v.shape[1]]
            exists = np.isfinite(neighbor)
            is_max &= (v >= neighbor) | ~exists
            strictly_above |= (v > neighbor) & exists
    is_max &= strictly_above
    xs, ys = grid.spec.xs(), grid.spec.ys()
    ii, jj = np.nonzero(is_max)
    order = np.argsort(v[ii, jj])[::-1]
    peaks = []
    for idx in order:
        loc = np.array([xs[ii[idx]], ys[jj[idx]]])
        if any(np.hypot(*(loc - p.location)) < min_separation for p in peaks):
            continue
        peaks.append(Peak(location=loc, value=float(v[ii[idx], jj[idx]])))
        if len(peaks) == k:
            break
    return peaks


def match_peaks(peaks, truths, radius: float) -> PeakReport:
    """Greedy nearest-distance assignment of peaks to true centers.

    Candidate pairs within ``radius`` are consumed smallest distance
    first; ties break on coordinates, so the outcome does not depend on
    input ordering.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    truths = [np.asarray(t, dtype=float).reshape(2) for t in truths]
    sorted_peaks = tuple(sorted(peaks, key=lambda p: (-p.value, p.location[0], p.location[1])))
    candidates = []
    for t in truths:
        for p in sorted_peaks:
            d = float(np.hypot(*(t - p.location)))
            if d <= radius:
                candidates.append((d, t[0], t[1], p.location[0], p.location[1], tuple(t), p))
    candidates.sort(key=lambda c: c[:5])
    used_truths: list = []
    used_peaks: list = []
    matches = []
    for d, *_rest, t_key, p in candidates:
        if any(t_key == u for u in used_truths) or any(p is q for q in used_peaks):
            continue
        used_truths.append(t_key)
        used_peaks.append(p)
        matches.append((np.array(t_key), p.location.copy(), d))
    unmatched = tuple(t for t in truths if tuple(t) not in used_truths)
    return PeakReport(peaks=sorted_peaks, matches=tuple(matches), unmatched_truths=unmatched)


def report_to_dict(report: PeakReport) -> dict:
    return {
        "peaks": [
            {"x": float(p.location[0]), "y": float(p.location[1]), "value": p.value} for p in report.peaks
        ],
        "matches": [
            {
                "truth": [float(t[0]), float(t[1])],
                "found": [float(f[0]), float(f[1])],
                "distance": float(d),
            }
            for t, f, d in report.matches
        ],
        "unmatched": [[float(t[0]), float(t[1])] for t in report.unmatched_truths],
    }


def save_report(report: PeakReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
