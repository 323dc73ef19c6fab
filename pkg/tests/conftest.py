import numpy as np
import pytest

from corrpose.camera import CameraIntrinsics
from corrpose.scene import box_grid, sphere


@pytest.fixture
def K100():
    """fx = fy = 100, principal point (50, 50), 100 x 100 image."""
    return CameraIntrinsics(100.0, 100.0, 50.0, 50.0, 100, 100)


@pytest.fixture
def K():
    return CameraIntrinsics.linemod()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def sphere500():
    return sphere(500)


@pytest.fixture(scope="session")
def box5():
    return box_grid(5)


def random_twist(rng, max_angle=3.0, trans_scale=1.0):
    phi = rng.normal(size=3)
    phi *= rng.uniform(0.0, max_angle) / np.linalg.norm(phi)
    return np.concatenate([rng.normal(size=3) * trans_scale, phi])


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[key])
