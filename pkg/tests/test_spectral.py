import numpy as np
import pytest
import scipy.linalg

from conftest import OMEGA_03, single_target_scene
from music2d.forward import MsrMatrix, asymptotic_msr
from music2d.numerics import directions
from music2d.scene import Medium, Scatterer, Scene
from music2d.spectral import (
    FirstK,
    Threshold,
    add_noise,
    decompose,
    residual_norm,
    residual_norms,
    save_singular_values,
    scheme_from_dict,
    scheme_to_dict,
    select,
)


def wrap(entries, omega=1.0):
    entries = np.asarray(entries, dtype=complex)
    return MsrMatrix(entries=entries, dirs=directions(entries.shape[0]), omega=omega)


def random_msr(n=16, seed=0):
    rng = np.random.default_rng(seed)
    return wrap(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))


def spread_scene(count, mu=1.0):
    spots = [(-0.6, -0.55), (0.5, 0.4), (0.55, -0.5), (-0.45, 0.6)]
    scatterers = tuple(
        Scatterer(center=np.array(z), radius=0.05 + 0.01 * i, medium=Medium(2.0 + 0.5 * i, mu))
        for i, z in enumerate(spots[:count])
    )
    return Scene(inhomogeneities=scatterers)


def test_zero_matrix_all_sigma_zero():
    sub = decompose(wrap(np.zeros((8, 8))))
    assert np.all(sub.singular_values == 0.0)


def test_decompose_reconstructs_input():
    msr = random_msr()
    sub = decompose(msr)
    rebuilt = (sub.vectors * sub.singular_values) @ sub.right_vectors
    assert np.linalg.norm(rebuilt - msr.entries) <= 1e-10 * np.linalg.norm(msr.entries)
    assert np.all(np.diff(sub.singular_values) <= 0) and np.all(sub.singular_values >= 0)


def test_decompose_rejects_nonfinite():
    bad = np.zeros((4, 4), dtype=complex)
    bad[1, 2] = np.nan
    with pytest.raises(ValueError):
        decompose(wrap(bad))


def test_single_dielectric_target_gives_rank_one():
    msr = asymptotic_msr(single_target_scene(), directions(32), OMEGA_03)
    s = decompose(msr).singular_values
    assert np.count_nonzero(s > 1e-10 * s[0]) == 1


def test_benchmark_rank_bounds(benchmark_scene, dirs32):
    msr = asymptotic_msr(benchmark_scene, dirs32, OMEGA_03)
    s = decompose(msr).singular_values
    above = np.count_nonzero(s > 1e-10 * s[0])
    assert 3 <= above <= 103


def test_select_threshold_counts():
    sub = decompose(wrap(np.diag([1.0, 0.5, 0.05])))
    picked = select(sub, Threshold(0.1))
    assert picked.selected_count == 2
    assert picked.scheme == "threshold(0.1)"


def test_select_threshold_includes_ties():
    sub = decompose(wrap(np.diag([1.0, 0.1, 0.01])))
    assert select(sub, Threshold(0.1)).selected_count == 2


def test_select_zero_matrix_threshold_empty():
    sub = decompose(wrap(np.zeros((5, 5))))
    assert select(sub, Threshold(0.1)).selected_count == 0


def test_select_first_k_leading_vectors(benchmark_msr_fl):
    sub = decompose(benchmark_msr_fl)
    picked = select(sub, FirstK(3))
    assert picked.selected_count == 3
    assert np.array_equal(picked.vectors, sub.vectors[:, :3])
    assert np.array_equal(picked.singular_values, sub.singular_values)


def test_select_validates_parameters():
    sub = decompose(random_msr(6))
    with pytest.raises(ValueError):
        select(sub, FirstK(0))
    with pytest.raises(ValueError):
        select(sub, FirstK(7))
    with pytest.raises(ValueError):
        Threshold(0.0)
    with pytest.raises(ValueError):
        Threshold(1.0)


def test_scheme_dict_roundtrip():
    for scheme in (Threshold(0.1), FirstK(3)):
        assert scheme_from_dict(scheme_to_dict(scheme)) == scheme
    with pytest.raises(ValueError):
        scheme_from_dict({"kind": "bogus"})


def test_residual_of_selected_vector_is_zero(benchmark_msr_fl):
    sub = select(decompose(benchmark_msr_fl), FirstK(3))
    for m in range(3):
        assert residual_norm(sub, sub.vectors[:, m]) <= 1e-10


def test_residual_empty_selection_is_identity():
    sub = select(decompose(wrap(np.zeros((8, 8)))), Threshold(0.1))
    f = np.ones(8, dtype=complex) / np.sqrt(8)
    assert residual_norm(sub, f) == pytest.approx(1.0, abs=1e-12)


def test_residual_matches_dense_projector_oracle():
    rng = np.random.default_rng(11)
    n = 32
    for trial in range(100):
        k = int(rng.integers(1, 9))
        basis = np.linalg.qr(rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k)))[0]
        sub = decompose(wrap(basis @ np.diag(rng.uniform(1, 2, k)) @ basis.conj().T @ np.eye(n)))
        picked = select(sub, FirstK(k))
        f = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        dense = np.eye(n) - picked.vectors @ picked.vectors.conj().T
        expected = np.linalg.norm(dense @ f)
        assert abs(residual_norm(picked, f) - expected) <= 1e-10
        assert 0.0 <= residual_norm(picked, f) <= np.linalg.norm(f) + 1e-12


def test_residual_norms_batch_agrees():
    sub = select(decompose(random_msr(12, seed=5)), FirstK(4))
    rng = np.random.default_rng(6)
    rows = rng.standard_normal((20, 12)) + 1j * rng.standard_normal((20, 12))
    batch = residual_norms(sub, rows)
    singles = [residual_norm(sub, row) for row in rows]
    assert np.allclose(batch, singles, atol=1e-12)


def test_residual_dimension_mismatch():
    sub = decompose(random_msr(8))
    with pytest.raises(ValueError):
        residual_norm(sub, np.ones(7))


def test_orthonormal_gram_of_selection():
    for seed in range(5):
        sub = select(decompose(random_msr(16, seed=seed)), FirstK(5))
        gram = sub.vectors.conj().T @ sub.vectors
        assert np.abs(gram - np.eye(5)).max() <= 1e-10


@pytest.mark.parametrize("count", [1, 2, 3, 4])
def test_rank_law_dielectric(count):
    msr = asymptotic_msr(spread_scene(count), directions(64), OMEGA_03)
    s = decompose(msr).singular_values
    assert np.count_nonzero(s > 1e-8 * s[0]) == count


@pytest.mark.parametrize("count", [1, 2, 3, 4])
def test_rank_law_mu_contrast(count):
    msr = asymptotic_msr(spread_scene(count, mu=2.0), directions(64), OMEGA_03)
    s = decompose(msr).singular_values
    assert np.count_nonzero(s > 1e-8 * s[0]) == min(64, 3 * count)


def test_scale_equivariance_of_svd():
    msr = asymptotic_msr(spread_scene(4), directions(64), OMEGA_03)
    c = 2.0 - 3.0j
    scaled = wrap(c * msr.entries)
    base = decompose(msr)
    other = decompose(scaled)
    assert np.allclose(other.singular_values, abs(c) * base.singular_values, rtol=1e-10, atol=1e-12)
    angles = scipy.linalg.subspace_angles(base.vectors[:, :4], other.vectors[:, :4])
    assert angles.max() <= 1e-8


def test_add_noise_exact_energy():
    msr = random_msr(24, seed=9)
    noisy = add_noise(msr, 10.0, seed=123)
    err = noisy.entries - msr.entries
    ratio = np.linalg.norm(err) ** 2 / np.linalg.norm(msr.entries) ** 2
    assert ratio == pytest.approx(0.1, abs=1e-12)


def test_add_noise_huge_snr_negligible():
    msr = random_msr(8, seed=2)
    noisy = add_noise(msr, 300.0, seed=4)
    ratio = np.linalg.norm(noisy.entries - msr.entries) / np.linalg.norm(msr.entries)
    assert ratio == pytest.approx(1e-15, rel=1e-9)


def test_add_noise_deterministic():
    msr = random_msr(8, seed=2)
    a = add_noise(msr, 10.0, seed=77)
    b = add_noise(msr, 10.0, seed=77)
    assert np.array_equal(a.entries, b.entries)


def test_add_noise_rejects_zero_matrix():
    with pytest.raises(ValueError):
        add_noise(wrap(np.zeros((4, 4))), 10.0, seed=1)


def test_singular_values_csv(tmp_path):
    sub = decompose(wrap(np.diag([2.0, 1.0, 0.5])))
    path = tmp_path / "sv.csv"
    save_singular_values(sub, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "index,sigma,sigma_normalized"
    assert lines[1] == "1,2.0,1.0"
    assert lines[3] == "3,0.5,0.25"
