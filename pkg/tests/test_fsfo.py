import math

import numpy as np
import pytest

from accelcert import coeffs, oracles
from accelcert.fsfo import (Method, build_schedule, obl_f_tilde, obl_g_flat_h, run_fsfo,
                            run_generator, unroll, generator)

from conftest import random_suite

BUILTIN = ["gd", "fgm", "ogm", "ogm-g", "orc-f-flat", "obl-f-flat", "obl-g-flat"]


def test_fgm_one_step():
    assert build_schedule("fgm", 1).h[1, 0] == 1.0


def test_obl_f_flat_one_step():
    assert build_schedule("obl-f-flat", 1).h[1, 0] == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("N", [3, 4, 7, 12])
def test_obl_g_flat_first_entry_and_explicit_h(N):
    h = build_schedule("obl-g-flat", N).h
    assert h[1, 0] == pytest.approx((N + math.sqrt(2 * N * (N + 1))) / (N + 2), rel=1e-14)
    assert np.allclose(h, obl_g_flat_h(N), atol=1e-12)


def test_gd_schedule():
    h = build_schedule("gd", 6).h
    assert np.array_equal(h, np.eye(7, k=-1))


def test_horizon_validation():
    with pytest.raises(ValueError):
        build_schedule("obl-g-flat", 2)
    with pytest.raises(ValueError):
        build_schedule("fgm", 0)
    with pytest.raises(ValueError):
        build_schedule("custom", 2)


def test_custom_schedule_is_strictly_lower():
    h = np.arange(9.0).reshape(3, 3)
    s = build_schedule("custom", 2, h=h)
    assert np.array_equal(s.h, np.tril(h, -1))


def test_gd_and_fgm_exact_on_scalar_quadratic():
    o = oracles.make_quadratic([[3.0]], [0.0])
    t = run_fsfo(build_schedule("gd", 1), o, [1.0])
    assert t.x[1, 0] == 0.0
    t = run_fsfo(build_schedule("fgm", 1), o, [1.0])
    assert t.y[1, 0] == 0.0 and t.fy[1] - o.f_star == 0.0


def test_fgm_diag_bound(quad_diag):
    o, x0 = quad_diag
    N = 10
    t = run_fsfo(build_schedule("fgm", N), o, x0)
    R2 = float((x0 - o.x_star) @ (x0 - o.x_star))
    assert t.fy[N] - o.f_star <= o.L * R2 / (2 * coeffs.theta(N - 1) ** 2)


@pytest.mark.parametrize("method", BUILTIN)
@pytest.mark.parametrize("o,x0", random_suite(3, seed=2))
def test_recursion_and_h_matrix_agree(method, o, x0):
    N = 9
    a = run_fsfo(build_schedule(method, N), o, x0)
    b = run_generator(method, o, x0, N)
    sc = max(1.0, np.abs(a.x).max())
    assert np.allclose(a.x, b.x, atol=1e-11 * sc, rtol=0)


@pytest.mark.parametrize("method", BUILTIN)
def test_fixed_point(method):
    o, _ = oracles.get_problem("quad-diag-10")
    t = run_fsfo(build_schedule(method, 5), o, o.x_star)
    assert np.all(t.x == o.x_star) and np.all(t.fx == o.f_star)


def test_obl_f_tilde_weights(quad_diag):
    o, x0 = quad_diag
    t = run_fsfo(build_schedule("obl-f-flat", 4, last_step=False), o, x0)
    assert np.array_equal(obl_f_tilde(t, 0), t.z[0])
    assert np.allclose(obl_f_tilde(t, 1), (t.y[1] + t.z[1]) / 2)
    r = math.sqrt(3)
    assert np.allclose(obl_f_tilde(t, 2), (r * t.y[2] + t.z[2]) / (r + 1))


def test_obl_f_last_step_is_tilde(quad_diag):
    o, x0 = quad_diag
    N = 6
    plain = run_fsfo(build_schedule("obl-f-flat", N, last_step=False), o, x0)
    mod = run_fsfo(build_schedule("obl-f-flat", N), o, x0)
    assert np.allclose(mod.x[N], obl_f_tilde(plain, N), atol=1e-13)
    assert np.allclose(mod.x[:N], plain.x[:N], atol=1e-13)


def test_unroll_matches_generator_cumulative():
    a, w = generator(Method.FGM, 5)
    h = unroll(a, w, 5)
    assert h.shape == (6, 6) and np.all(np.triu(h) == 0)


def test_csv_format(quad_diag):
    o, x0 = quad_diag
    t = run_fsfo(build_schedule("fgm", 3), o, x0)
    text = t.to_csv(o.f_star)
    lines = text.split("\n")
    assert lines[0] == "k,f_gap,grad_norm_sq,Lk,jump_flag"
    assert len(lines) == 6 and lines[-1] == "" and "\r" not in text
    assert float(lines[2].split(",")[1]) == t.fx[1] - o.f_star
