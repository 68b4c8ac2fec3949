import numpy as np
import pytest

from music2d import FirstK, GridSpec, Medium, Scatterer, Scene, decompose, directions, reference_scene, select
from music2d.forward import foldy_lax_far_field

OMEGA_03 = 2.0 * np.pi / 0.3


@pytest.fixture(scope="session")
def benchmark_scene():
    return reference_scene(1)


@pytest.fixture(scope="session")
def dirs32():
    return directions(32)


@pytest.fixture(scope="session")
def benchmark_msr_fl(benchmark_scene, dirs32):
    return foldy_lax_far_field(benchmark_scene, dirs32, OMEGA_03)


@pytest.fixture(scope="session")
def benchmark_sub3(benchmark_msr_fl):
    return select(decompose(benchmark_msr_fl), FirstK(3))


@pytest.fixture(scope="session")
def default_grid():
    return GridSpec()


def single_target_scene(center=(0.25, 0.0), eps=3.0, mu=1.0, radius=0.1):
    return Scene(inhomogeneities=(Scatterer(center=np.asarray(center), radius=radius, medium=Medium(eps, mu)),))
