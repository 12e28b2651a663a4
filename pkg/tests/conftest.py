import numpy as np
import pytest

from eitkit.forward import CEMForwardModel
from eitkit.mesh import ElectrodeLayout, build_transfer, generate_disk_mesh


@pytest.fixture(scope="session")
def layout16():
    return ElectrodeLayout(16, contact_impedances=0.05, coverage_fraction=0.5)


@pytest.fixture(scope="session")
def layout8():
    return ElectrodeLayout(8, contact_impedances=0.05, coverage_fraction=0.5)


@pytest.fixture(scope="session")
def coarse_mesh(layout16):
    return generate_disk_mesh(492, layout16)


@pytest.fixture(scope="session")
def fine_mesh(layout16):
    return generate_disk_mesh(1968, layout16)


@pytest.fixture(scope="session")
def transfer(fine_mesh, coarse_mesh):
    return build_transfer(fine_mesh, coarse_mesh)


@pytest.fixture(scope="session")
def small_mesh(layout8):
    # small problem for solver-oracle tests: ~70 elements, 8 electrodes
    return generate_disk_mesh(64, layout8)


@pytest.fixture(scope="session")
def small_model(small_mesh, layout8):
    return CEMForwardModel(small_mesh, layout8)


@pytest.fixture(scope="session")
def coarse_model(coarse_mesh, layout16):
    return CEMForwardModel(coarse_mesh, layout16)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
