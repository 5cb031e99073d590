import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dwellflee.document import bundled_document

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def specs():
    """Parsed specs of every bundled document, keyed by name."""
    names = ["destabiss", "bplssbistab", "mixed", "scope", "scope_v",
             "scope_v_ellipsoidal", "arbreset3d"]
    return {n: bundled_document(n).to_spec() for n in names}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_stable(rng, n, shift=0.2):
    """Random Hurwitz matrix: spectrum pushed left of ``-shift``."""
    A = rng.standard_normal((n, n))
    top = np.max(np.linalg.eigvals(A).real)
    return A - (top + shift + rng.random()) * np.eye(n)


def random_unstable(rng, n, shift=0.2):
    A = rng.standard_normal((n, n))
    top = np.max(np.linalg.eigvals(A).real)
    return A - (top - shift - rng.random()) * np.eye(n)
