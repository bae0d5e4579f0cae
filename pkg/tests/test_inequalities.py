import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from accelcert import inequalities as ineq
from accelcert import oracles

from conftest import random_suite

PROBS = random_suite(4, seed=5) + [oracles.get_problem("huber-1d"), oracles.get_problem("lse-2")]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, len(PROBS) - 1), st.integers(0, 2**31 - 1))
def test_all_families_nonnegative(pi, seed):
    o, x0 = PROBS[pi]
    rng = np.random.default_rng(seed)
    x = x0 + rng.normal(size=o.dim) * 3
    y = x0 + rng.normal(size=o.dim) * 3
    for kind in ("cocoercivity", "convexity"):
        assert ineq.residual(kind, o, x, y).ok
    assert ineq.residual("gradient_step", o, x).ok
    if o.coordinate_L is not None:
        i = int(rng.integers(o.dim))
        assert ineq.residual("coord_cocoercivity", o, x, y, i=i).ok
        assert ineq.residual("coord_gradient_step", o, x, i=i).ok


def test_too_small_modulus_detected():
    o = oracles.make_quadratic(np.diag([1.0, 10.0]), np.zeros(2))
    r = ineq.residual("cocoercivity", o, np.array([0.0, 1.0]), np.zeros(2), L_override=1.0)
    assert not r.ok


def test_coordinate_chain_ordering():
    o, _ = oracles.get_problem("quad-diag-10")
    rng = np.random.default_rng(0)
    for _ in range(20):
        x, y = rng.normal(size=2), rng.normal(size=2)
        c = ineq.coord_coco_chain(o, x, y, int(rng.integers(2)))
        assert c["gstar_minus_gx"] <= c["gu_minus_gx"] + 1e-12
        assert c["gu_minus_gx"] <= c["bound"] + 1e-12
        assert c["residual"] >= -1e-12


def test_interpolation_check():
    o, _ = oracles.get_problem("quad-diag-10")
    pts = [np.array(p) for p in ([0.0, 0.0], [1.0, 2.0], [-1.0, 0.5])]
    trip = [(p, o.gradient(p), o.value(p)) for p in pts]
    assert ineq.check_interpolable(trip, o.L).ok
    assert not ineq.check_interpolable(trip, 1.0).ok


def test_missing_arguments():
    o, _ = oracles.get_problem("quad-diag-10")
    with pytest.raises(ValueError):
        ineq.residual("convexity", o, np.zeros(2))
    with pytest.raises(ValueError):
        ineq.residual("coord_gradient_step", o, np.zeros(2))
