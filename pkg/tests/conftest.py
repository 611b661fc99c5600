"""Shared fixtures: coarse meshes and small phantoms that keep the unit suite fast."""

# Import third-party modules
import pytest
from loguru import logger

# Import local modules
from mfeit.core.admittivity import MaterialSpec
from mfeit.core.geometry import ConductiveDisk, Phantom, ThinInsulator
from mfeit.core.mesh import mesh_domain
from mfeit.core.pixels import Pixelation
from mfeit.core.protocol import ElectrodeLayout


@pytest.fixture
def materials():
    return MaterialSpec()


@pytest.fixture
def homogeneous(materials):
    return Phantom(domain_radius=1.0, materials=materials)


@pytest.fixture
def segment_phantom(materials):
    """One horizontal insulator through the center."""
    return Phantom(domain_radius=1.0, insulators=(ThinInsulator((-0.4, 0.0), (0.4, 0.0), 0.01),), materials=materials)


@pytest.fixture
def mixed_phantom(materials):
    """One insulator above one conductive disk."""
    return Phantom(
        domain_radius=1.0,
        insulators=(ThinInsulator((-0.4, 0.3), (0.4, 0.3), 0.005),),
        disks=(ConductiveDisk((0.0, -0.3), 0.1),),
        materials=materials,
    )


@pytest.fixture
def coarse_mesh(homogeneous):
    return mesh_domain(homogeneous, 0.2, pixelation=Pixelation(8, 1.0))


@pytest.fixture
def layout():
    return ElectrodeLayout(16, 0.5)


@pytest.fixture
def caplog_loguru(caplog):
    """Route loguru records into pytest's caplog."""
    handler_id = logger.add(caplog.handler, format="{message}", level="DEBUG")
    yield caplog
    logger.remove(handler_id)
