import json
import os

import numpy as np
import pytest

from music2d import cli
from music2d.cli import ConfigError, ExperimentConfig, compare_bundles, load_config, main, run
from music2d.forward import ForwardModelError
from music2d.imaging import load_grid_csv
from music2d.scene import load_scene


def small_config(outdir, **overrides):
    cfg = {
        "scene": {"kind": "reference", "seed": 1},
        "wavelengths": [0.3],
        "n_directions": 16,
        "selection": {"kind": "first_k", "k": 3},
        "grid": {"nx": 41, "ny": 41},
        "forward": "asymptotic",
        "outputs": str(outdir),
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


BUNDLE_FILES = [
    "scene.json",
    "msr_0.3.csv",
    "singular_values_0.3.csv",
    "map_music.csv",
    "map_music.pgm",
    "map_music.pgm.json",
    "peaks.json",
    "summary.json",
]


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_run_writes_bundle_and_is_deterministic(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    cfg = ExperimentConfig.from_dict(small_config(out_a, theory="full"))
    run(cfg)
    for name in BUNDLE_FILES + ["map_theory.csv", "map_theory.pgm"]:
        assert (out_a / name).exists(), name

    cfg_b = ExperimentConfig.from_dict(small_config(out_b, theory="full"))
    run(cfg_b)
    for name in BUNDLE_FILES[:-1] + ["map_theory.csv", "map_theory.pgm", "map_music.pgm.json"]:
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name
    # summaries differ only in the configured output path
    sum_a = json.loads((out_a / "summary.json").read_text())
    sum_b = json.loads((out_b / "summary.json").read_text())
    sum_a["config"].pop("outputs")
    sum_b["config"].pop("outputs")
    assert sum_a == sum_b


def test_config_roundtrip_is_idempotent(tmp_path):
    raw = small_config(tmp_path / "x", noise={"snr_db": 10, "seed": 5}, theory="targets_only")
    cfg = ExperimentConfig.from_dict(raw)
    once = cfg.to_dict()
    twice = ExperimentConfig.from_dict(once).to_dict()
    assert once == twice


def test_config_rejects_unknown_and_invalid_fields(tmp_path):
    with pytest.raises(ConfigError, match="unknown field"):
        ExperimentConfig.from_dict(small_config(tmp_path, bogus=1))
    with pytest.raises(ConfigError, match="wavelengths"):
        ExperimentConfig.from_dict(small_config(tmp_path, wavelengths=[0.4, 0.3]))
    with pytest.raises(ConfigError, match="wavelengths"):
        ExperimentConfig.from_dict(small_config(tmp_path, wavelengths=[-0.1]))
    with pytest.raises(ConfigError, match="selection"):
        ExperimentConfig.from_dict(small_config(tmp_path, selection={"kind": "nope"}))
    with pytest.raises(ConfigError, match="forward"):
        ExperimentConfig.from_dict(small_config(tmp_path, forward="fem"))
    with pytest.raises(ConfigError, match="n_directions"):
        ExperimentConfig.from_dict(small_config(tmp_path, n_directions=0))
    with pytest.raises(ConfigError, match="noise.seed"):
        ExperimentConfig.from_dict(small_config(tmp_path, noise={"snr_db": 10}))


def test_load_config_reports_json_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "scene": [,]\n}')
    with pytest.raises(ConfigError, match="line 2"):
        load_config(path)


def test_main_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert main(["image", "--config", str(bad)]) == cli.EXIT_CONFIG
    assert "config field" in capsys.readouterr().err


def test_main_numerical_failure_exit(tmp_path, monkeypatch):
    cfg_path = write_config(tmp_path, small_config(tmp_path / "out", forward="foldy_lax"))

    def boom(*args, **kwargs):
        raise ForwardModelError("singular coupling system at omega=1")

    monkeypatch.setattr(cli, "foldy_lax_far_field", boom)
    assert main(["image", "--config", str(cfg_path)]) == cli.EXIT_NUMERICAL


def test_empty_scene_gives_constant_map(tmp_path):
    empty = {
        "background": {"eps": 1.0, "mu": 1.0},
        "inhomogeneities": [],
        "randoms": [],
        "domain": {"min": [-1.0, -1.0], "max": [1.0, 1.0]},
    }
    out = tmp_path / "out"
    cfg = ExperimentConfig.from_dict(
        small_config(out, scene={"kind": "inline", "scene": empty}, selection={"kind": "threshold", "ratio": 0.1})
    )
    run(cfg)
    grid_map = load_grid_csv(out / "map_music.csv")
    assert np.allclose(grid_map.values, 1.0, atol=1e-12)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_env_var_overrides_output_dir(tmp_path, monkeypatch):
    configured = tmp_path / "configured"
    actual = tmp_path / "actual"
    monkeypatch.setenv(cli.ENV_OUTPUT_DIR, str(actual))
    run(ExperimentConfig.from_dict(small_config(configured)))
    assert actual.exists() and not configured.exists()


def test_scene_subcommand(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["scene", "--seed", "3", "--out", "scene.json"]) == 0
    scene = load_scene(tmp_path / "scene.json")
    assert scene.n_targets == 3 and scene.n_randoms == 100


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_forward_subcommand_is_data_only(tmp_path):
    out = tmp_path / "out"
    cfg_path = write_config(tmp_path, small_config(out))
    assert main(["forward", "--config", str(cfg_path)]) == 0
    assert (out / "msr_0.3.csv").exists()
    assert (out / "singular_values_0.3.csv").exists()
    assert not (out / "map_music.csv").exists()


def test_theory_subcommand(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["scene", "--seed", "1", "--out", "scene.json"]) == 0
    assert main([
        "theory", "--scene", "scene.json", "--wavelength", "0.3",
        "--mode", "targets_only", "--nx", "41", "--ny", "41", "--out", "theory.csv",
    ]) == 0
    grid_map = load_grid_csv(tmp_path / "theory.csv")
    assert grid_map.spec.nx == 41
    assert (tmp_path / "theory.pgm").exists()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_compare_bundle_with_itself(tmp_path):
    out = tmp_path / "out"
    run(ExperimentConfig.from_dict(small_config(out)))
    report = compare_bundles(str(out), str(out), use_theory=False, exclusion=0.0, out_path=None)
    assert report["rel_l2"] == 0.0
    assert report["correlation"] == pytest.approx(1.0)
    assert report["background_median_ratio"] == pytest.approx(1.0)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_compare_selection_schemes_artifact_ratio(tmp_path):
    base = small_config(tmp_path / "first3", n_directions=32, forward="foldy_lax")
    run(ExperimentConfig.from_dict(base))
    other = small_config(tmp_path / "threshold", n_directions=32, forward="foldy_lax",
                         selection={"kind": "threshold", "ratio": 0.1})
    run(ExperimentConfig.from_dict(other))
    report = compare_bundles(str(tmp_path / "first3"), str(tmp_path / "threshold"),
                             use_theory=False, exclusion=0.0, out_path=str(tmp_path / "cmp.json"))
    assert report["background_median_ratio"] > 1.0
    assert json.loads((tmp_path / "cmp.json").read_text()) == report


def test_compare_requires_second_bundle_or_theory(tmp_path, capsys):
    assert main(["compare", str(tmp_path)]) == cli.EXIT_CONFIG


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_sweep_runs_every_entry(tmp_path):
    sweep_cfg = {
        "base": {k: v for k, v in small_config(tmp_path / "ignored").items() if k != "outputs"},
        "sweep": {
            "n_directions": [8, 16],
            "selection": [{"kind": "first_k", "k": 3}, {"kind": "threshold", "ratio": 0.1}],
        },
        "outputs": str(tmp_path / "sweep"),
    }
    path = write_config(tmp_path, sweep_cfg, name="sweep.json")
    assert main(["sweep", "--config", str(path), "--jobs", "1"]) == 0
    index = json.loads((tmp_path / "sweep" / "sweep_index.json").read_text())
    assert len(index["entries"]) == 4
    for name in index["entries"]:
        assert (tmp_path / "sweep" / name / "map_music.csv").exists()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_sweep_parallel_jobs(tmp_path):
    sweep_cfg = {
        "base": {k: v for k, v in small_config(tmp_path / "ignored").items() if k != "outputs"},
        "sweep": {"n_directions": [8, 12]},
        "outputs": str(tmp_path / "psweep"),
    }
    path = write_config(tmp_path, sweep_cfg, name="sweep.json")
    assert main(["sweep", "--config", str(path), "--jobs", "2"]) == 0
    index = json.loads((tmp_path / "psweep" / "sweep_index.json").read_text())
    assert len(index["entries"]) == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_multifrequency_run_with_noise(tmp_path):
    out = tmp_path / "multi"
    cfg = ExperimentConfig.from_dict(small_config(
        out, wavelengths=[0.3, 0.5, 0.7], noise={"snr_db": 10, "seed": 9}, forward="foldy_lax",
    ))
    summary = run(cfg)
    for lam in ("0.3", "0.5", "0.7"):
        assert (out / f"msr_{lam}.csv").exists()
        assert (out / f"singular_values_{lam}.csv").exists()
    # noise seeds derive per frequency, recorded for reproducibility
    assert summary["noise_seeds"] == {"0.7": 9, "0.5": 10, "0.3": 11}
    assert (out / "map_music.csv").exists()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_multifrequency_ten_wavelength_bundle(tmp_path):
    from music2d.forward import equispaced_wavelengths

    out = tmp_path / "f10"
    lams = [round(float(x), 10) for x in equispaced_wavelengths(10, 0.3, 0.7)]
    cfg = ExperimentConfig.from_dict(small_config(out, wavelengths=lams, forward="foldy_lax"))
    summary = run(cfg)
    assert len(summary["selected_counts"]) == 10
    assert len(list(out.glob("msr_*.csv"))) == 10
    meta_lams = json.loads((out / "summary.json").read_text())["config"]["wavelengths"]
    assert meta_lams == lams


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_compare_against_theory_meets_thresholds(tmp_path):
    from music2d.scene import Scene, Scatterer, Medium, scene_to_dict
    import numpy as np

    lone = Scene(inhomogeneities=(Scatterer(center=np.array([0.25, 0.0]), radius=0.1, medium=Medium(3.0, 1.0)),))
    out = tmp_path / "lone"
    cfg = ExperimentConfig.from_dict(small_config(
        out,
        scene={"kind": "inline", "scene": scene_to_dict(lone)},
        n_directions=64,
        selection={"kind": "threshold", "ratio": 1e-8},
        grid={"nx": 101, "ny": 101},
        theory="full",
    ))
    run(cfg)
    report = compare_bundles(str(out), None, use_theory=True, exclusion=0.3 / 4.0, out_path=None)
    assert report["rel_l2"] <= 0.15


def test_summary_reports_radius_warnings(tmp_path):
    out = tmp_path / "warn"
    with pytest.warns(RuntimeWarning, match="quarter wavelength"):
        summary = run(ExperimentConfig.from_dict(small_config(out)))
    assert summary["radius_warnings"]["0.3"] == [0, 1, 2]
    assert summary["separation_violations"]["0.3"] == []
    assert summary["clutter_coupling_ratio"] < 0.5
