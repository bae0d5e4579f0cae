"""End-to-end acceptance checks, one printed PASS/FAIL line per criterion."""
import math
import time

import numpy as np
import pytest

from accelcert import adaptive, lyapunov as ly, oracles, pep
from accelcert.coeffs import CoefficientTable
from accelcert.fsfo import build_schedule, obl_f_tilde, run_fsfo, run_generator

from conftest import random_suite

ALL_METHODS = ("gd", "fgm", "ogm", "ogm-g", "orc-f-flat", "obl-f-flat", "obl-g-flat",
               "orc-f", "fgm-rc", "fgm-rc-sharp", "fgm-bl", "obl-f", "obl-g")


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail
    return emit


def suite():
    """20 random quadratics of dimension <= 10 plus a Huber problem."""
    probs = random_suite(20, seed=2024, dim_max=10)
    probs.append((oracles.make_huber(1.0, [0.5, -1.0, 2.0]), np.array([6.0, 3.0, -4.0])))
    return probs


def dist2(o, x0):
    d = x0 - o.x_star
    return float(d @ d)


def run(method, o, x0, N, seed=0):
    if method in ("gd", "fgm", "ogm", "ogm-g", "orc-f-flat", "obl-g-flat"):
        return run_fsfo(build_schedule(method, N), o, x0)
    if method == "obl-f-flat":
        return run_fsfo(build_schedule(method, N, last_step=False), o, x0)
    if method == "orc-f":
        return adaptive.run_orc_f(o, x0, N, seed)
    if method == "fgm-rc":
        return adaptive.run_fgm_rc(o, x0, N, seed)
    if method == "fgm-rc-sharp":
        return adaptive.run_fgm_rc(o, x0, N, seed, sharp=True)
    if method == "fgm-bl":
        return adaptive.run_fgm_bl(o, x0, N, L0=o.L / 10)
    if method == "obl-f":
        return adaptive.run_obl_f(o, x0, N, L0=o.L / 10)
    return adaptive.run_obl_g(o, x0, N, L0=o.L / 4)


def test_criterion_01_sequences(report):
    start = time.perf_counter()
    tab = CoefficientTable()
    K = 10 ** 4
    th = tab.theta_array(K + 2)
    ph = tab.phi_array(K + 2)
    r_th = np.max(np.abs(th[1:] ** 2 - th[1:] - th[:-1] ** 2) / th[:-1] ** 2)
    r_ph = np.max(np.abs(ph[1:] - ph[:-1] - 1 - np.sqrt(1 + ph[:-1])) / ph[1:])
    tt = np.array([tab.theta_tilde(k) for k in range(1, K + 1)])
    r_tt = np.max(np.abs(tt ** 2 - tt - 2 * th[:K] ** 2) / (2 * th[:K] ** 2))
    order = bool(np.all(th[:K + 1] ** 2 <= ph[1:K + 2]))
    elapsed = time.perf_counter() - start
    worst = max(r_th, r_ph, r_tt)
    report(1, worst <= 1e-12 and order and elapsed < 1.0,
           f"max recurrence residual {worst:.2e}, theta^2<=phi_next {order}, {elapsed:.3f}s")


def test_criterion_02_fgm(report):
    worst = math.inf
    for o, x0 in suite():
        N = 101
        t = run("fgm", o, x0, N)
        LR2 = o.L * dist2(o, x0)
        for k in range(101):
            bound = LR2 / (2 * ly.default_table().theta(k) ** 2)
            worst = min(worst, (bound - (t.fy[k + 1] - o.f_star)) / LR2)
    report(2, worst >= -1e-9, f"min slack/LR^2 {worst:.3e} over 21 problems, k<=100")


def test_criterion_03_ogm(report):
    worst = math.inf
    for o, x0 in suite():
        LR2 = o.L * dist2(o, x0)
        for N in (1, 2, 3, 5, 10, 25, 50, 100):
            t = run("ogm", o, x0, N)
            bound = LR2 / (2 * ly.default_table().theta_tilde(N) ** 2)
            worst = min(worst, (bound - (t.fx[N] - o.f_star)) / LR2)
    report(3, worst >= -1e-9, f"min slack/LR^2 {worst:.3e}")


def test_criterion_04_ogm_g(report):
    worst = math.inf
    for o, x0 in suite()[:10]:
        f0 = float(o.eval(x0)[0] - o.f_star)
        for N in range(3, 61):
            t = run("ogm-g", o, x0, N)
            g = t.gx[N]
            bound = 2 * o.L * f0 / ly.default_table().theta_tilde(N) ** 2
            worst = min(worst, (bound - g @ g) / (o.L * f0))
    report(4, worst >= -1e-9, f"min slack/(L f0) {worst:.3e}, N=3..60")


def test_criterion_05_orc(report):
    tab = ly.default_table()
    worst_flat = math.inf
    for o, x0 in suite():
        LR2 = o.L * dist2(o, x0)
        t = run("orc-f-flat", o, x0, 60)
        for k in range(60):
            worst_flat = min(worst_flat, (LR2 / (2 * tab.phi(k + 1)) - (t.fy[k + 1] - o.f_star)) / LR2)
    min_dec = math.inf
    for o, x0 in suite()[:10]:
        rep = ly.verify_decrement("orc-f", run("orc-f", o, x0, 20, seed=1), oracle=o)
        min_dec = min(min_dec, rep.min_expected_decrement)
    mc_ok = True
    worst_mc = math.inf
    for o, x0 in (oracles.get_problem("quad-diag-10"), suite()[3]):
        N, seeds = 25, 200
        gaps = np.array([run("orc-f", o, x0, N, seed=s).fy[1:N + 1] - o.f_star for s in range(seeds)])
        mean, sd = gaps.mean(axis=0), gaps.std(axis=0, ddof=1)
        R = math.sqrt(dist2(o, x0))
        for k in range(N):
            b = ly.rate_bound("orc-f", k, o.L, R, S=o.S) + 3 * sd[k] / math.sqrt(seeds)
            worst_mc = min(worst_mc, b - mean[k])
            mc_ok &= bool(mean[k] <= b)
    ok = worst_flat >= -1e-9 and min_dec >= -1e-10 and mc_ok
    report(5, ok, f"flat slack {worst_flat:.3e}, min E-decrement {min_dec:.3e}, MC min margin {worst_mc:.3e}")


def test_criterion_06_obl_f_flat(report):
    worst_t = worst_y = math.inf
    for o, x0 in suite():
        LR2 = o.L * dist2(o, x0)
        N = 101
        t = run("obl-f-flat", o, x0, N)
        for k in range(N):
            worst_y = min(worst_y, (LR2 / ((k + 1) * (k + 2)) - (t.fy[k + 1] - o.f_star)) / LR2)
            if k >= 1:
                xt = obl_f_tilde(t, k)
                gap = float(o.eval(xt)[0] - o.f_star)
                worst_t = min(worst_t, (LR2 / (k * (k + 1) + math.sqrt(2 * k * (k + 1))) - gap) / LR2)
    report(6, worst_t >= -1e-9 and worst_y >= -1e-9,
           f"x~ slack {worst_t:.3e}, y slack {worst_y:.3e}, k<=100")


def test_criterion_07_obl_f(report):
    bound_jumps = math.ceil(math.log2(10)) + 1
    ok, worst_jumps, worst_LN = True, 0, 0.0
    for o, x0 in suite() + [oracles.get_problem("quad-diag-10")]:
        t = adaptive.run_obl_f(o, x0, 50, L0=o.L / 10, eta=2.0)
        dec = ly.verify_decrement("obl-f", t, oracle=o)
        rate = ly.verify_rate("obl-f", t, oracle=o)
        worst_jumps = max(worst_jumps, len(t.jumps))
        worst_LN = max(worst_LN, t.Lk[-1] / o.L)
        ok &= dec.ok and rate.ok
    ok &= worst_jumps <= bound_jumps and worst_LN <= 2.0
    report(7, ok, f"inequality chain ok, max jumps {worst_jumps} (<= {bound_jumps}), max L_N/L {worst_LN:.3f}")


def test_criterion_08_obl_g(report):
    worst_c = worst_4 = math.inf
    for o, x0 in suite()[:10]:
        f0 = float(o.eval(x0)[0] - o.f_star)
        for N in range(3, 61):
            g = run("obl-g-flat", o, x0, N).gx[N]
            r = math.sqrt(2 * N * (N + 1))
            closed = 4 * o.L * f0 * (N * N + N - r) / (N * N * (N + 1) ** 2 - 2 * r)
            worst_c = min(worst_c, (closed - g @ g) / (o.L * f0))
            worst_4 = min(worst_4, (4 * o.L * f0 / N ** 2 - g @ g) / (o.L * f0))
    adapt_ok = True
    for o, x0 in suite():
        for N in (3, 10, 30):
            t = adaptive.run_obl_g(o, x0, N, L0=o.L / 4, eta=2.0)
            rate = ly.verify_rate("obl-g", t, oracle=o)
            adapt_ok &= all(c.ok for c in rate.checks if c.binding)
    report(8, worst_c >= -1e-9 and worst_4 >= -1e-9 and adapt_ok,
           f"closed-form slack {worst_c:.3e}, 4/N^2 slack {worst_4:.3e}, adaptive inequality {adapt_ok}")


def test_criterion_09_lyapunov(report):
    start = time.perf_counter()
    probs = random_suite(10, seed=99, dim_max=8)
    worst, ok = 0.0, True
    for method in ly.METHODS:
        for i, (o, x0) in enumerate(probs):
            rep = ly.verify_decrement(method, run(method, o, x0, 25, seed=i), oracle=o)
            ok &= rep.ok
            worst = max(worst, rep.max_identity_residual)
    elapsed = time.perf_counter() - start
    report(9, ok and worst <= 1e-9 and elapsed < 30.0,
           f"10 methods x 10 problems, max relative residual {worst:.2e}, {elapsed:.2f}s")


def test_criterion_10_certificates(report):
    start = time.perf_counter()
    ok, fails = True, []
    worst = dict(lin=0.0, zero=0.0, eig=0.0, tau=0.0, h=0.0)
    for method in ("orc-f-flat", "obl-f-flat", "fgm", "obl-g-flat"):
        for N in range(3 if method == "obl-g-flat" else 1, 26):
            rep = pep.certify(method, N, L=1.0)
            worst["lin"] = max(worst["lin"], rep.linear_residual)
            worst["zero"] = max(worst["zero"], rep.zero_block)
            worst["eig"] = max(worst["eig"], -rep.min_eig)
            worst["tau"] = max(worst["tau"], abs(rep.tau - rep.tau_closed_form) / rep.tau_closed_form)
            worst["h"] = max(worst["h"], rep.h_match)
            good = (rep.linear_residual <= 1e-12 and rep.zero_block <= 1e-9 and rep.min_eig >= -1e-9
                    and abs(rep.tau - rep.tau_closed_form) <= 1e-12 * rep.tau_closed_form
                    and rep.h_match <= 1e-9)
            if method != "obl-g-flat":
                good &= rep.kkt is not None and bool(rep.kkt["ok"])
            if not good:
                fails.append((method, N))
            ok &= good
    elapsed = time.perf_counter() - start
    summary = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    report(10, ok and elapsed < 60.0, f"{summary}, failures {fails}, {elapsed:.2f}s")


def test_criterion_11_degeneracy(report):
    bit = True
    for Lval in (1.0, 4.0, 10.0, 0.37):
        o = oracles.make_quadratic([[Lval]], [1.5])
        x0 = np.array([-3.0])
        for r, d in ((adaptive.run_orc_f(o, x0, 30, seed=5), run_generator("orc-f-flat", o, x0, 30)),
                     (adaptive.run_fgm_rc(o, x0, 30, seed=5, sharp=True), run_generator("fgm", o, x0, 30))):
            bit &= bool(np.array_equal(r.x, d.x) and np.array_equal(r.y, d.y))
    const = True
    o, _ = oracles.get_problem("quad-diag-10")
    for m in ALL_METHODS:
        t = run(m, o, o.x_star.copy(), 8)
        const &= bool(np.all(t.x == o.x_star) and np.all(t.fx == o.f_star))
    report(11, bit and const, f"n=1 bit-match {bit}, constant at x_star for {len(ALL_METHODS)} methods {const}")


def test_criterion_12_ordering(report):
    tab = CoefficientTable()
    K = 10 ** 4
    th2 = tab.theta_array(K + 1) ** 2
    ph = tab.phi_array(K + 2)[1:]
    o, _ = oracles.get_problem("quad-diag-10")
    L, S2 = o.L, o.S ** 2
    orc = L / (2 * ph)
    fgm = L / (2 * th2)
    rc = S2 / (2 * th2)
    ok = bool(np.all(orc <= fgm) and np.all(fgm <= rc))
    gain = float(np.max(fgm / orc))
    report(12, ok, f"ORC-F-flat <= FGM <= FGM-RC-sharp for k<=1e4, max FGM/ORC ratio {gain:.4f}")
