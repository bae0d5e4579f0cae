import numpy as np
import pytest

from accelcert import oracles


def random_suite(count, seed=0, dim_max=10, cond=100.0):
    """Seeded random quadratics with starting points."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        d = int(rng.integers(1, dim_max + 1))
        o = oracles.random_quadratic(rng, d, cond=cond, name=f"rq-{seed}-{i}")
        out.append((o, rng.normal(size=d) * 2.0))
    return out


@pytest.fixture
def quad_diag():
    return oracles.get_problem("quad-diag-10")
