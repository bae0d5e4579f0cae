import math

import numpy as np
import pytest

from accelcert import adaptive, coeffs, oracles
from accelcert.fsfo import build_schedule, run_fsfo, run_generator

from conftest import random_suite


def test_splitmix64_reference_stream():
    g = adaptive.SplitMix64(0)
    assert [g.next_u64() for _ in range(3)] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4,
                                                 0x06C45D188009454F]


def test_next_float_range():
    g = adaptive.SplitMix64(7)
    vals = [g.next_float() for _ in range(1000)]
    assert min(vals) >= 0.0 and max(vals) < 1.0


def test_sampler_frequencies(quad_diag):
    o, _ = quad_diag
    s = adaptive.CoordinateSampler.for_oracle(o, seed=1)
    draws = np.array([s.draw() for _ in range(20000)])
    p1 = float(np.mean(draws == 1))
    assert abs(p1 - o.probabilities[1]) < 4 * math.sqrt(p1 * (1 - p1) / 20000)


def test_sampler_deterministic(quad_diag):
    o, x0 = quad_diag
    a = adaptive.run_orc_f(o, x0, 20, seed=5)
    b = adaptive.run_orc_f(o, x0, 20, seed=5)
    assert np.array_equal(a.coords, b.coords) and np.array_equal(a.x, b.x)


@pytest.mark.parametrize("Lval", [1.0, 4.0, 10.0, 0.37])
def test_single_coordinate_bit_match(Lval):
    o = oracles.make_quadratic([[Lval]], [1.5])
    x0 = np.array([-3.0])
    pairs = [(adaptive.run_orc_f(o, x0, 30, seed=2), run_generator("orc-f-flat", o, x0, 30)),
             (adaptive.run_fgm_rc(o, x0, 30, seed=2, sharp=True), run_generator("fgm", o, x0, 30))]
    for r, d in pairs:
        assert np.array_equal(r.x, d.x)
        assert np.array_equal(r.y, d.y)


@pytest.mark.parametrize("run", [
    lambda o, x: adaptive.run_orc_f(o, x, 8, seed=0),
    lambda o, x: adaptive.run_fgm_rc(o, x, 8, seed=0),
    lambda o, x: adaptive.run_fgm_rc(o, x, 8, seed=0, sharp=True),
    lambda o, x: adaptive.run_fgm_bl(o, x, 8, L0=o.L / 10),
    lambda o, x: adaptive.run_obl_f(o, x, 8, L0=o.L / 10),
    lambda o, x: adaptive.run_obl_g(o, x, 8, L0=o.L / 10),
])
def test_fixed_point(run, quad_diag):
    o, _ = quad_diag
    t = run(o, o.x_star.copy())
    assert np.all(t.x == o.x_star)
    assert not t.jumps


def test_exact_estimate_reproduces_flat_methods(quad_diag):
    o, x0 = quad_diag
    N = 12
    f = adaptive.run_obl_f(o, x0, N, L0=o.L)
    assert f.extra["backtracks"] == 0 and not f.jumps
    ref = run_fsfo(build_schedule("obl-f-flat", N, last_step=False), o, x0)
    assert np.allclose(f.x, ref.x, atol=1e-12)
    g = adaptive.run_obl_g(o, x0, N, L0=o.L)
    ref = run_fsfo(build_schedule("obl-g-flat", N), o, x0)
    assert np.allclose(g.x, ref.x, atol=1e-12)
    b = adaptive.run_fgm_bl(o, x0, N, L0=o.L)
    ref = run_fsfo(build_schedule("fgm", N), o, x0)
    assert not b.jumps and np.allclose(b.x, ref.x, atol=1e-12)


def test_obl_f_jump_bound(quad_diag):
    o, x0 = quad_diag
    t = adaptive.run_obl_f(o, x0, 40, L0=o.L / 16, eta=2.0)
    assert t.Lk[-1] <= 2 * o.L
    assert len(t.jumps) <= math.ceil(math.log2(16)) + 1
    assert np.all(np.diff(t.Lk) >= 0)


def test_fgm_bl_huber_bound():
    o, x0 = oracles.get_problem("huber-1d")
    N = 30
    t = adaptive.run_fgm_bl(o, x0, N, L0=o.L / 10)
    R = float(np.linalg.norm(x0 - o.x_star))
    assert t.fy[N] - o.f_star <= adaptive.fgm_bl_bound(t, R) + 1e-12


def test_fgm_rc_sharp_monte_carlo(quad_diag):
    o, x0 = quad_diag
    N, seeds = 50, 200
    gaps = np.array([adaptive.run_fgm_rc(o, x0, N, seed=s, sharp=True).fy[N] - o.f_star
                     for s in range(seeds)])
    R = float(np.linalg.norm(x0 - o.x_star))
    bound = adaptive.fgm_rc_sharp_bound(N - 1, o.S, R)
    assert gaps.mean() <= bound + 3 * gaps.std(ddof=1) / math.sqrt(seeds)


def test_backtracking_validation(quad_diag):
    o, x0 = quad_diag
    with pytest.raises(ValueError):
        adaptive.run_obl_g(o, x0, 2, L0=1.0)
    with pytest.raises(ValueError):
        adaptive.run_obl_f(o, x0, 5, L0=-1.0)
    with pytest.raises(ValueError):
        adaptive.run_obl_g(o, x0, 5, L0=1.0, step_estimate="other")


def test_obl_g_printed_variant_runs(quad_diag):
    o, x0 = quad_diag
    t = adaptive.run_obl_g(o, x0, 10, L0=o.L / 4, step_estimate="printed")
    assert t.extra["step_estimate"] == "printed" and np.all(np.isfinite(t.x))


def test_coordinate_coefficients():
    a, w = adaptive.coordinate_coefficients("fgm-rc", 3)
    assert np.allclose(a, [1.0, 1.5, 2.0, 2.5]) and np.allclose(w, [1 / 3, 2 / 4, 3 / 5, 4 / 6])
    a, w = adaptive.coordinate_coefficients("orc-f", 2)
    t = coeffs.default_table()
    assert a[0] == t.phi(1) - t.phi(0) and w[1] == t.phi(2) / t.phi(3)
