import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from iimns.grid import GridFunction, GridSpec, VectorGridFunction

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_scalar(spec, rng):
    return GridFunction(spec, rng.standard_normal(spec.shape))


def random_vector(spec, rng):
    return VectorGridFunction(spec, rng.standard_normal((2,) + spec.shape))


def cos_mode(spec, k1, k2):
    """Real part of the Fourier mode ``e_k`` sampled on the grid."""
    X, Y = spec.mesh
    c = np.pi / spec.L
    return GridFunction(spec, np.cos(c * (k1 * X + k2 * Y)))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
