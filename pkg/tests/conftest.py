import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES = []


def grid_mesh(nx, ny, spacing=1.0, jitter=0.0, rng=None, z=None):
    """Regular grid triangulated into right triangles; optional in-plane jitter and height."""
    from maskfit.geometry import TriangleMesh

    xs, ys = np.meshgrid(np.arange(nx) * spacing, np.arange(ny) * spacing, indexing="ij")
    v = np.stack([xs.ravel(), ys.ravel(), np.zeros(nx * ny)], axis=1)
    if jitter and rng is not None:
        v[:, :2] += rng.uniform(-jitter, jitter, (len(v), 2)) * spacing
    if z is not None:
        v[:, 2] = z(v[:, 0], v[:, 1])
    faces = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            a, b, c, d = i * ny + j, (i + 1) * ny + j, i * ny + j + 1, (i + 1) * ny + j + 1
            faces += [(a, b, d), (a, d, c)]
    return TriangleMesh(v, np.array(faces))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def template_assets():
    from maskfit.synthetic import make_template

    return make_template(25)


@pytest.fixture(scope="session")
def synthetic_scan(template_assets):
    from maskfit.synthetic import make_scan

    return make_scan(template_assets)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance checks at full asset scale")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
