"""Reproducible experiment runner.

One JSON config describes scene, frequencies, data model, selection,
noise, and grid; ``run`` writes a self-contained artifact bundle (scene,
MSR matrices, singular spectra, maps as CSV + PGM, peak report, summary
with all seeds and versions).  Identical configs produce byte-identical
bundles.  Exit codes: 0 success, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import itertools
import json
import os
import sys
import warnings
from dataclasses import dataclass

import numpy as np
import scipy

from . import __version__, analysis, imaging, spectral
from .forward import ForwardModelError, asymptotic_msr, foldy_lax_far_field, save_msr
from .imaging import GridSpec, background_median
from .numerics import directions
from .scene import (
    DEFAULT_SEED,
    clutter_coupling_ratio,
    load_scene,
    oversized_scatterers,
    reference_scene,
    save_scene,
    scene_from_dict,
    validate_separation,
)

ENV_OUTPUT_DIR = "MUSIC2D_OUTPUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"config field '{field}': {message}")
        self.field = field


def _require(cond: bool, field: str, message: str) -> None:
    if not cond:
        raise ConfigError(field, message)


@dataclass(frozen=True)
class ExperimentConfig:
    scene_source: dict
    wavelengths: tuple
    n_directions: int
    selection: object
    noise: dict | None
    grid_nx: int
    grid_ny: int
    forward: str
    theory: str | None
    peaks: dict
    outputs: str

    @staticmethod
    def from_dict(raw: dict) -> "ExperimentConfig":
        _require(isinstance(raw, dict), "<root>", "config must be a JSON object")
        known = {"scene", "wavelengths", "n_directions", "selection", "noise",
                 "grid", "forward", "theory", "peaks", "outputs"}
        for key in raw:
            _require(key in known, key, "unknown field")

        scene_source = raw.get("scene")
        _require(isinstance(scene_source, dict), "scene", "must be an object")
        kind = scene_source.get("kind")
        _require(kind in ("reference", "file", "inline"), "scene.kind",
                 "must be one of 'reference', 'file', 'inline'")
        if kind == "reference":
            seed = scene_source.get("seed", DEFAULT_SEED)
            _require(isinstance(seed, int), "scene.seed", "must be an integer")
        elif kind == "file":
            _require(isinstance(scene_source.get("path"), str), "scene.path", "must be a string")
        else:
            _require(isinstance(scene_source.get("scene"), dict), "scene.scene", "must be a scene object")

        wavelengths = raw.get("wavelengths")
        _require(isinstance(wavelengths, list) and wavelengths, "wavelengths", "must be a non-empty list")
        for lam in wavelengths:
            _require(isinstance(lam, (int, float)) and lam > 0, "wavelengths", "entries must be positive numbers")
        if len(wavelengths) > 1:
            _require(all(b > a for a, b in zip(wavelengths, wavelengths[1:])),
                     "wavelengths", "must be strictly increasing")

        n_directions = raw.get("n_directions")
        _require(isinstance(n_directions, int) and n_directions >= 1, "n_directions", "must be a positive integer")

        try:
            selection = spectral.scheme_from_dict(raw.get("selection") or {})
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError("selection", str(exc)) from exc

        noise = raw.get("noise")
        if noise is not None:
            _require(isinstance(noise, dict), "noise", "must be an object")
            _require(isinstance(noise.get("snr_db"), (int, float)), "noise.snr_db", "must be a number")
            _require(isinstance(noise.get("seed"), int), "noise.seed", "must be an integer")
            noise = {"snr_db": float(noise["snr_db"]), "seed": int(noise["seed"])}

        grid = raw.get("grid") or {}
        _require(isinstance(grid, dict), "grid", "must be an object")
        nx = grid.get("nx", 101)
        ny = grid.get("ny", 101)
        _require(isinstance(nx, int) and nx >= 2, "grid.nx", "must be an integer >= 2")
        _require(isinstance(ny, int) and ny >= 2, "grid.ny", "must be an integer >= 2")

        forward = raw.get("forward", "foldy_lax")
        _require(forward in ("asymptotic", "foldy_lax"), "forward", "must be 'asymptotic' or 'foldy_lax'")

        theory = raw.get("theory")
        if theory is not None:
            _require(theory in ("full", "targets_only"), "theory", "must be 'full' or 'targets_only'")

        peaks = raw.get("peaks") or {}
        _require(isinstance(peaks, dict), "peaks", "must be an object")
        peaks = {
            "k": peaks.get("k"),
            "min_separation": peaks.get("min_separation", 0.3),
            "match_radius": peaks.get("match_radius"),
        }
        if peaks["k"] is not None:
            _require(isinstance(peaks["k"], int) and peaks["k"] >= 1, "peaks.k", "must be a positive integer")

        outputs = raw.get("outputs")
        _require(isinstance(outputs, str) and outputs, "outputs", "must be a non-empty directory path")

        return ExperimentConfig(
            scene_source=scene_source,
            wavelengths=tuple(float(x) for x in wavelengths),
            n_directions=n_directions,
            selection=selection,
            noise=noise,
            grid_nx=nx,
            grid_ny=ny,
            forward=forward,
            theory=theory,
            peaks=peaks,
            outputs=outputs,
        )

    def to_dict(self) -> dict:
        out = {
            "scene": dict(self.scene_source),
            "wavelengths": list(self.wavelengths),
            "n_directions": self.n_directions,
            "selection": spectral.scheme_to_dict(self.selection),
            "grid": {"nx": self.grid_nx, "ny": self.grid_ny},
            "forward": self.forward,
            "peaks": dict(self.peaks),
            "outputs": self.outputs,
        }
        if self.noise is not None:
            out["noise"] = dict(self.noise)
        if self.theory is not None:
            out["theory"] = self.theory
        return out


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return ExperimentConfig.from_dict(raw)


def _build_scene(source: dict):
    kind = source["kind"]
    if kind == "reference":
        return reference_scene(source.get("seed", DEFAULT_SEED))
    if kind == "file":
        return load_scene(source["path"])
    try:
        return scene_from_dict(source["scene"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("scene.scene", str(exc)) from exc


def _write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _output_dir(configured: str) -> str:
    return os.environ.get(ENV_OUTPUT_DIR, configured)


def run(config: ExperimentConfig, data_only: bool = False) -> dict:
    """Execute one experiment; returns the summary dict it also writes.

    With ``data_only`` the run stops after the MSR matrices and singular
    spectra (the ``forward`` subcommand), skipping maps and peaks.
    """
    outdir = _output_dir(config.outputs)
    os.makedirs(outdir, exist_ok=True)

    scene = _build_scene(config.scene_source)
    save_scene(scene, os.path.join(outdir, "scene.json"))
    dirs = directions(config.n_directions)
    grid = GridSpec(domain=scene.domain, nx=config.grid_nx, ny=config.grid_ny)

    summary: dict = {
        "config": config.to_dict(),
        "versions": {"music2d": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "rng": "numpy default_rng (PCG64)",
        "separation_violations": {},
        "radius_warnings": {},
        "clutter_coupling_ratio": clutter_coupling_ratio(scene),
        "selected_counts": {},
        "singular_values_top": {},
        "noise_seeds": {},
    }
    if summary["clutter_coupling_ratio"] >= 0.5:
        warnings.warn(
            "random scatterers are not much weaker than the targets; "
            "their singular values may not separate", RuntimeWarning, stacklevel=2)

    forward_fn = asymptotic_msr if config.forward == "asymptotic" else foldy_lax_far_field

    subs = []
    omegas = []
    # ascending omega == descending wavelength
    for idx, lam in enumerate(sorted(config.wavelengths, reverse=True)):
        omega = 2.0 * np.pi / lam
        tag = f"{lam:g}"
        sep = validate_separation(scene, omega)
        if sep:
            warnings.warn(f"targets closer than the separation bound at wavelength {tag}", RuntimeWarning, stacklevel=2)
        summary["separation_violations"][tag] = [list(p) for p in sep]
        oversized = oversized_scatterers(scene, omega)
        if oversized:
            warnings.warn(
                f"{len(oversized)} scatterer(s) have radius above a quarter wavelength at {tag}",
                RuntimeWarning, stacklevel=2)
        summary["radius_warnings"][tag] = oversized

        msr = forward_fn(scene, dirs, omega)
        if config.noise is not None:
            noise_seed = config.noise["seed"] + idx
            msr = spectral.add_noise(msr, config.noise["snr_db"], noise_seed)
            summary["noise_seeds"][tag] = noise_seed
        save_msr(msr, os.path.join(outdir, f"msr_{tag}.csv"))

        sub = spectral.decompose(msr)
        spectral.save_singular_values(sub, os.path.join(outdir, f"singular_values_{tag}.csv"))
        sub = spectral.select(sub, config.selection)
        summary["selected_counts"][tag] = sub.selected_count
        top = sub.singular_values[:10]
        norm = sub.singular_values[0] if sub.singular_values[0] > 0 else 1.0
        summary["singular_values_top"][tag] = [float(v / norm) for v in top]
        subs.append(sub)
        omegas.append(omega)

    if data_only:
        _write_json(summary, os.path.join(outdir, "summary.json"))
        return summary

    if len(omegas) == 1:
        grid_map = imaging.music_map(subs[0], dirs, omegas[0], grid)
    else:
        grid_map = imaging.multifreq_map(subs, dirs, omegas, grid)
    imaging.save_grid_csv(grid_map, os.path.join(outdir, "map_music.csv"))
    imaging.save_grid_pgm(grid_map, os.path.join(outdir, "map_music.pgm"))

    if config.theory is not None:
        # predicted at the finest wavelength, where resolution is best
        theory_map = imaging.theoretical_map(scene, grid, max(omegas), mode=config.theory)
        imaging.save_grid_csv(theory_map, os.path.join(outdir, "map_theory.csv"))
        imaging.save_grid_pgm(theory_map, os.path.join(outdir, "map_theory.pgm"))
        summary["theory_wavelength"] = f"{2.0 * np.pi / max(omegas):g}"

    k = config.peaks["k"] if config.peaks["k"] is not None else max(scene.n_targets, 1)
    radius = config.peaks["match_radius"] if config.peaks["match_radius"] is not None else grid.cell_diagonal()
    peaks = analysis.find_peaks(grid_map, k, config.peaks["min_separation"])
    report = analysis.match_peaks(peaks, scene.centers("targets"), radius)
    analysis.save_report(report, os.path.join(outdir, "peaks.json"))
    summary["peaks"] = analysis.report_to_dict(report)
    summary["matched_targets"] = len(report.matches)

    all_centers = scene.centers("all")
    if len(all_centers):
        try:
            bg = background_median(grid_map, all_centers, min(config.wavelengths) / 2.0)
        except ValueError:
            bg = None
    else:
        bg = float(np.median(grid_map.values))
    summary["background_median_raw"] = bg
    summary["map_max"] = float(grid_map.values.max())
    summary["background_median_normalized"] = (
        bg / summary["map_max"] if bg is not None and summary["map_max"] > 0 else None
    )

    _write_json(summary, os.path.join(outdir, "summary.json"))
    return summary


def compare_bundles(dir_a: str, dir_b: str | None, use_theory: bool,
                    exclusion: float | None, out_path: str | None) -> dict:
    """Compare two bundle maps (or a bundle against its own predicted map)."""
    map_a = imaging.load_grid_csv(os.path.join(dir_a, "map_music.csv"))
    if use_theory:
        path_b = os.path.join(dir_a, "map_theory.csv")
        if not os.path.exists(path_b):
            raise ConfigError("<compare>", f"{dir_a} holds no map_theory.csv (run with a 'theory' mode set)")
        map_b = imaging.load_grid_csv(path_b)
    else:
        map_b = imaging.load_grid_csv(os.path.join(dir_b, "map_music.csv"))

    scene = load_scene(os.path.join(dir_a, "scene.json"))
    with open(os.path.join(dir_a, "summary.json")) as fh:
        summary_a = json.load(fh)
    lam_min = min(summary_a["config"]["wavelengths"])
    if exclusion is None:
        exclusion = 0.0

    centers = scene.centers("all")
    report = imaging.compare_maps(map_a, map_b, exclusion, centers=centers)

    bg_radius = lam_min / 2.0
    out = dict(report)
    for tag, grid_map in (("a", map_a), ("b", map_b)):
        bg = background_median(grid_map, centers, bg_radius)
        peak = float(grid_map.values.max())
        out[f"background_median_{tag}"] = bg
        out[f"background_median_normalized_{tag}"] = bg / peak if peak > 0 else None
        out[f"map_max_{tag}"] = peak
    out["background_median_ratio"] = (
        out["background_median_b"] / out["background_median_a"]
        if out["background_median_a"] else None
    )
    out["background_radius"] = bg_radius

    peaks_a = analysis.find_peaks(map_a, max(scene.n_targets, 1), 0.3)
    peaks_b = analysis.find_peaks(map_b, max(scene.n_targets, 1), 0.3)
    cell = map_a.spec.cell_diagonal()
    cross = analysis.match_peaks(peaks_a, [p.location for p in peaks_b], cell)
    out["peaks_a"] = [{"x": float(p.location[0]), "y": float(p.location[1]), "value": p.value} for p in peaks_a]
    out["peaks_b"] = [{"x": float(p.location[0]), "y": float(p.location[1]), "value": p.value} for p in peaks_b]
    out["peaks_common"] = len(cross.matches)

    if out_path:
        _write_json(out, out_path)
    return out


# ---------------------------------------------------------------------------
# sweep

def _sweep_entries(raw: dict) -> list:
    _require(isinstance(raw.get("base"), dict), "base", "must be an object")
    _require(isinstance(raw.get("outputs"), str) and raw["outputs"], "outputs", "must be a directory path")
    axes = raw.get("sweep") or {}
    _require(isinstance(axes, dict), "sweep", "must be an object")
    for key in axes:
        _require(key in ("wavelengths", "n_directions", "selection"), f"sweep.{key}", "unknown sweep axis")

    wl_axis = axes.get("wavelengths", [raw["base"].get("wavelengths")])
    n_axis = axes.get("n_directions", [raw["base"].get("n_directions")])
    sel_axis = axes.get("selection", [raw["base"].get("selection")])
    entries = []
    for idx, (wl, n, sel) in enumerate(itertools.product(wl_axis, n_axis, sel_axis)):
        entry = dict(raw["base"])
        entry["wavelengths"] = wl
        entry["n_directions"] = n
        entry["selection"] = sel
        sel_tag = "-".join(str(v) for v in sel.values()) if isinstance(sel, dict) else str(sel)
        wl_tag = "-".join(f"{w:g}" for w in wl) if isinstance(wl, list) else str(wl)
        name = f"run{idx:03d}_wl{wl_tag}_N{n}_{sel_tag}"
        entry["outputs"] = os.path.join(raw["outputs"], name)
        entries.append((name, ExperimentConfig.from_dict(entry)))
    return entries


def run_sweep(path: str, jobs: int) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    entries = _sweep_entries(raw)
    outdir = _output_dir(raw["outputs"])
    os.makedirs(outdir, exist_ok=True)
    index = {}
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(run, cfg): name for name, cfg in entries}
            for fut, name in futures.items():
                summary = fut.result()
                index[name] = {"matched_targets": summary["matched_targets"]}
    else:
        for name, cfg in entries:
            summary = run(cfg)
            index[name] = {"matched_targets": summary["matched_targets"]}
    _write_json({"entries": sorted(index)}, os.path.join(outdir, "sweep_index.json"))
    return index


# ---------------------------------------------------------------------------
# argument parsing

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="music2d", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_scene = sub.add_parser("scene", help="generate a scene JSON")
    p_scene.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_scene.add_argument("--out", default="scene.json")

    p_forward = sub.add_parser("forward", help="compute MSR matrices for a config")
    p_forward.add_argument("--config", required=True)

    p_image = sub.add_parser("image", help="full pipeline: data, SVD, map, peaks")
    p_image.add_argument("--config", required=True)

    p_theory = sub.add_parser("theory", help="closed-form predicted map for a scene")
    p_theory.add_argument("--scene", required=True, help="scene JSON path")
    p_theory.add_argument("--wavelength", type=float, required=True)
    p_theory.add_argument("--mode", choices=("full", "targets_only"), default="full")
    p_theory.add_argument("--nx", type=int, default=101)
    p_theory.add_argument("--ny", type=int, default=101)
    p_theory.add_argument("--out", default="map_theory.csv")

    p_cmp = sub.add_parser("compare", help="compare two bundles, or one against its predicted map")
    p_cmp.add_argument("bundle_a")
    p_cmp.add_argument("bundle_b", nargs="?")
    p_cmp.add_argument("--theory", action="store_true", help="compare bundle_a against its map_theory")
    p_cmp.add_argument("--exclusion", type=float, default=0.0, help="radius around scatterers to drop")
    p_cmp.add_argument("--out", default=None, help="write the report JSON here")

    p_sweep = sub.add_parser("sweep", help="Cartesian sweep over wavelengths/N/selection")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--jobs", type=int, default=os.cpu_count() or 1)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "scene":
            scene = reference_scene(args.seed)
            if clutter_coupling_ratio(scene) >= 0.5:
                warnings.warn("random scatterers are not much weaker than the targets", RuntimeWarning)
            save_scene(scene, args.out)
            print(args.out)
        elif args.command in ("forward", "image"):
            summary = run(load_config(args.config), data_only=args.command == "forward")
            outdir = _output_dir(summary["config"]["outputs"])
            print(outdir)
        elif args.command == "theory":
            if not str(args.out).endswith(".csv"):
                raise ConfigError("out", "theory output must be a .csv path")
            scene = load_scene(args.scene)
            grid = GridSpec(domain=scene.domain, nx=args.nx, ny=args.ny)
            omega = 2.0 * np.pi / args.wavelength
            grid_map = imaging.theoretical_map(scene, grid, omega, mode=args.mode)
            imaging.save_grid_csv(grid_map, args.out)
            imaging.save_grid_pgm(grid_map, str(args.out)[:-4] + ".pgm")
            print(args.out)
        elif args.command == "compare":
            if not args.theory and not args.bundle_b:
                raise ConfigError("<compare>", "provide a second bundle or --theory")
            report = compare_bundles(args.bundle_a, args.bundle_b, args.theory, args.exclusion, args.out)
            print(json.dumps(report, indent=2, sort_keys=True))
        elif args.command == "sweep":
            run_sweep(args.config, max(args.jobs, 1))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ForwardModelError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
