import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sgefem.assembly import assemble_parts
from sgefem.mesh import build_structured_square

settings.register_profile(
    "default",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

_PARTS = {}


def square_parts(n, gram=False):
    """Cached mesh and form pieces of the structured unit-square mesh."""
    key = (n, gram)
    if key not in _PARTS:
        mesh = build_structured_square(n)
        _PARTS[key] = (mesh, assemble_parts(mesh, gram=gram))
    return _PARTS[key]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_triangles(rng, count, max_quality=10.0):
    """Random nondegenerate triangles with diameter/inradius below ``max_quality``."""
    out = []
    while len(out) < count:
        v = rng.uniform(-2.0, 2.0, size=(3, 2))
        d1, d2 = v[1] - v[0], v[2] - v[0]
        det = d1[0] * d2[1] - d1[1] * d2[0]
        if abs(det) < 1e-3:
            continue
        if det < 0:
            v = v[[0, 2, 1]]
        lengths = np.linalg.norm(v[[1, 2, 0]] - v, axis=1)
        area = 0.5 * abs(det)
        inradius = 2.0 * area / lengths.sum()
        if lengths.max() / (2.0 * inradius) <= max_quality:
            out.append(v)
    return np.array(out)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
