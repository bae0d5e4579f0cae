"""Lyapunov functions along trajectories and two-sided decrement identities.

Each method's decrement U_k - U_{k+1} is evaluated directly and as a
weighted sum of inequality residuals; the gap between the two is the
identity residual. Randomized methods are also checked in conditional
expectation by enumerating every coordinate with its sampling weight.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .adaptive import coordinate_step, obl_g_correction
from .coeffs import CoefficientTable, default_table
from .fsfo import Trajectory, obl_f_tilde
from .oracles import SmoothOracle

IDENTITY_RTOL = 1e-9
DECREMENT_RTOL = 1e-9
ENUM_ATOL = 1e-10
RATE_RTOL = 1e-9

METHODS = ("fgm", "ogm", "fgm-rc-sharp", "fgm-bl", "orc-f-flat", "orc-f",
           "obl-f-flat", "obl-f", "obl-g-flat", "obl-g")
RATE_METHODS = METHODS + ("ogm-g", "fgm-rc")
RANDOMIZED = ("orc-f", "fgm-rc-sharp")


class LyapunovError(ValueError):
    """Method/trajectory mismatch or missing data."""


@dataclass
class Term:
    name: str
    multiplier: float
    residual: float
    inequality: bool = True    # residual is nonnegative by a valid inequality

    @property
    def value(self) -> float:
        return self.multiplier * self.residual


@dataclass
class StepRecord:
    k: int
    U: float
    U_next: float
    decrement: float
    terms: list
    identity_residual: float
    scale: float
    expected_decrement: Optional[float] = None
    expected_terms: Optional[list] = None
    expected_identity_residual: Optional[float] = None
    lower_bound: Optional[float] = None

    @property
    def decomposition(self) -> float:
        return float(sum(t.value for t in self.terms))


@dataclass
class LyapunovReport:
    method: str
    N: int
    steps: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures

    @property
    def max_identity_residual(self) -> float:
        """Largest identity residual relative to its step's scale."""
        vals = [s.identity_residual / s.scale for s in self.steps]
        vals += [s.expected_identity_residual / s.scale for s in self.steps
                 if s.expected_identity_residual is not None]
        return max(vals, default=0.0)

    @property
    def min_decrement(self) -> float:
        return min((s.decrement for s in self.steps), default=0.0)

    @property
    def min_expected_decrement(self) -> Optional[float]:
        vals = [s.expected_decrement for s in self.steps if s.expected_decrement is not None]
        return min(vals) if vals else None

    def U(self) -> np.ndarray:
        if not self.steps:
            return np.zeros(0)
        return np.array([s.U for s in self.steps] + [self.steps[-1].U_next])

    def to_dict(self) -> dict:
        def terms(ts):
            return None if ts is None else [
                {"name": t.name, "multiplier": t.multiplier, "residual": t.residual,
                 "inequality": t.inequality} for t in ts]
        return {
            "method": self.method, "N": self.N, "ok": self.ok, "failures": list(self.failures),
            "max_identity_residual": self.max_identity_residual,
            "k": [s.k for s in self.steps],
            "U": [s.U for s in self.steps],
            "U_next": [s.U_next for s in self.steps],
            "decrement": [s.decrement for s in self.steps],
            "identity_residual": [s.identity_residual for s in self.steps],
            "scale": [s.scale for s in self.steps],
            "expected_decrement": [s.expected_decrement for s in self.steps],
            "lower_bound": [s.lower_bound for s in self.steps],
            "terms": [terms(s.terms) for s in self.steps],
            "expected_terms": [terms(s.expected_terms) for s in self.steps],
            "extra": _jsonable(self.extra),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


# inequality residuals

def _gradstep(fa: float, fb: float, g, Lc: float) -> float:
    """f(x) - f(x - g/L) - |g|^2 / 2L."""
    return float(fa - fb - g @ g / (2.0 * Lc))


def _conv(fa: float, fb: float, gb, xa, xb) -> float:
    """f(a) - f(b) - <g(b), a - b>."""
    return float(fa - fb - gb @ (xa - xb))


def _coco(fa: float, fb: float, ga, gb, xa, xb, Lc: float) -> float:
    """f(a) - f(b) - <g(b), a - b> - |g(a) - g(b)|^2 / 2L."""
    d = ga - gb
    return float(fa - fb - gb @ (xa - xb) - d @ d / (2.0 * Lc))


# evaluation context

class _Ctx:
    def __init__(self, method: str, traj: Trajectory, oracle: SmoothOracle,
                 table: Optional[CoefficientTable]):
        self.method = method
        self.t = traj
        self.o = oracle
        self.tab = table or default_table()
        self.N = traj.N
        self.L = float(traj.L) if math.isfinite(traj.L) else float(oracle.L)
        self.fs = float(oracle.f_star)
        self.xs = None if oracle.x_star is None else np.asarray(oracle.x_star, dtype=float)
        self.last_step = bool(traj.extra.get("last_step", True))

    def need_xstar(self):
        if self.xs is None:
            raise LyapunovError(f"{self.method} Lyapunov needs x_star on the oracle")
        return self.xs

    def dist2(self, v) -> float:
        d = v - self.need_xstar()
        return float(d @ d)

    def th(self, k: int) -> float:
        return 0.0 if k < 0 else self.tab.theta(k)

    def phi(self, k: int) -> float:
        return self.tab.phi(k)

    def g2(self, k: int) -> float:
        g = self.t.gx[k]
        return float(g @ g)

    def Lk(self, k: int) -> float:
        """Smoothness estimate L_k, with L_{-1} = L_0."""
        return float(self.t.Lk[max(k, 0)])


_TRAJ_METHOD = {"fgm-rc-sharp": "fgm-rc-sharp"}


def _check_method(method: str, traj: Trajectory, allowed) -> str:
    method = str(getattr(method, "value", method))
    if method not in allowed:
        raise LyapunovError(f"no Lyapunov analysis for {method!r}")
    if traj.method != _TRAJ_METHOD.get(method, method):
        raise LyapunovError(f"trajectory was produced by {traj.method!r}, not {method!r}")
    return method


def _obl_g_consts(N: int) -> tuple[float, float]:
    """(beta0_hat, c0) with c0 = 1/(N(N+1)) - beta0_hat."""
    b0 = 2.0 * (math.sqrt(N * (N + 1) / 2.0) - 1.0) / ((N - 1) * N * (N + 1) * (N + 2))
    return b0, 1.0 / (N * (N + 1)) - b0


# Lyapunov values

def _u_fgm(c: _Ctx, k: int) -> float:
    t = c.t
    return c.th(k - 1) ** 2 * (t.fy[k] - c.fs) + c.L / 2.0 * c.dist2(t.z[k])


def _u_ogm(c: _Ctx, k: int) -> float:
    t = c.t
    return (2.0 * c.th(k) ** 2 * (t.fx[k] - c.fs - c.g2(k) / (2.0 * c.L))
            + c.L / 2.0 * c.dist2(t.z[k + 1]))


def _u_orc_flat(c: _Ctx, k: int) -> float:
    return c.phi(k) * (c.t.fy[k] - c.fs) + c.L / 2.0 * c.dist2(c.t.z[k])


def _coord_weight(c: _Ctx, k: int) -> float:
    """Gap weight of U_k for the coordinate methods, before the 1/S^2."""
    return c.phi(k) if c.method == "orc-f" else c.th(k - 1) ** 2


def _u_coord(c: _Ctx, k: int) -> float:
    S = c.o.S
    return _coord_weight(c, k) / S ** 2 * (c.t.fy[k] - c.fs) + 0.5 * c.dist2(c.t.z[k])


def _u_fgm_bl(c: _Ctx, k: int, Lval: Optional[float] = None) -> float:
    """U_{k,L}; L defaults to Lk[k]."""
    Lval = c.Lk(k) if Lval is None else Lval
    return c.th(k - 1) ** 2 / Lval * (c.t.fy[k] - c.fs) + 0.5 * c.dist2(c.t.z[k])


def _u_obl_flat(c: _Ctx, k: int) -> float:
    t = c.t
    j = max(k, 0)
    return ((k + 1) * (k + 2) / 2.0 * (t.fx[j] - c.fs - c.g2(j) / (2.0 * c.L))
            + c.L / 2.0 * c.dist2(t.z[k + 1]))


def _u_obl_f(c: _Ctx, k: int) -> float:
    t = c.t
    j = max(k, 0)
    Lj = c.Lk(k)
    return ((k + 1) * (k + 2) / (2.0 * Lj) * (t.fx[j] - c.fs - c.g2(j) / (2.0 * Lj))
            + 0.5 * c.dist2(t.z[k + 1]))


def _u_obl_g(c: _Ctx, k: int, adaptive: bool) -> float:
    t, N = c.t, c.N
    Lk = c.Lk(k) if adaptive else c.L
    _, c0 = _obl_g_consts(N)
    if k == 0:
        return c0 / (Lk if adaptive else 1.0) * (t.fx[0] - t.fx[N])
    if k == N:
        return c.g2(N) / (4.0 * Lk ** 2) if adaptive else c.g2(N) / (4.0 * c.L)
    m = N - k
    first = c.g2(k) / (2.0 * Lk) + t.fx[k] - t.fx[N] - float(t.gx[k] @ (t.x[k] - t.y[k]))
    inner = float((t.z[k] - t.y[k]) @ (t.z[k] - t.x[N]))
    if adaptive:
        return first / ((m + 1) * (m + 2) * Lk) + 4.0 / (m * (m + 1) * (m + 2) * (m + 3)) * inner
    return first / ((m + 1) * (m + 2)) + 4.0 * c.L / (m * (m + 1) * (m + 2) * (m + 3)) * inner


_VALUE: dict[str, Callable[[_Ctx, int], float]] = {
    "fgm": _u_fgm,
    "ogm": _u_ogm,
    "orc-f-flat": _u_orc_flat,
    "orc-f": _u_coord,
    "fgm-rc-sharp": _u_coord,
    "fgm-bl": _u_fgm_bl,
    "obl-f-flat": _u_obl_flat,
    "obl-f": _u_obl_f,
    "obl-g-flat": lambda c, k: _u_obl_g(c, k, False),
    "obl-g": lambda c, k: _u_obl_g(c, k, True),
}


def _index_range(c: _Ctx) -> tuple[int, int]:
    """Inclusive range of k for which U_k is defined."""
    N, m = c.N, c.method
    if m in ("fgm", "orc-f-flat", "orc-f", "fgm-rc-sharp"):
        return 0, N + 1
    if m == "fgm-bl":
        return 0, N
    if m == "ogm":
        return 0, (N - 1 if c.last_step else N)
    if m == "obl-f-flat":
        return -1, (N - 1 if c.last_step else N)
    if m == "obl-f":
        return -1, N
    return 0, N


def lyapunov_value(method, trajectory: Trajectory, k: int, table: Optional[CoefficientTable] = None,
                   oracle: Optional[SmoothOracle] = None) -> float:
    """U_k of ``method`` along ``trajectory``. FGM-BL uses L = Lk[k]."""
    if oracle is None:
        raise LyapunovError("an oracle with f_star (and x_star where needed) is required")
    method = _check_method(method, trajectory, METHODS)
    c = _Ctx(method, trajectory, oracle, table)
    lo, hi = _index_range(c)
    if not lo <= k <= hi:
        raise LyapunovError(f"{method}: U_k defined for k in [{lo}, {hi}], got {k}")
    return float(_VALUE[method](c, k))


# decompositions of U_k - U_{k+1}

def _terms_fgm(c: _Ctx, k: int) -> list:
    t = c.t
    return [
        Term("gradient_step(x_k)", c.th(k) ** 2, _gradstep(t.fx[k], t.fy[k + 1], t.gx[k], c.L)),
        Term("convexity(y_k, x_k)", c.th(k - 1) ** 2, _conv(t.fy[k], t.fx[k], t.gx[k], t.y[k], t.x[k])),
        Term("convexity(x_star, x_k)", c.th(k), _conv(c.fs, t.fx[k], t.gx[k], c.xs, t.x[k])),
    ]


def _terms_ogm(c: _Ctx, k: int) -> list:
    t = c.t
    j = k + 1
    star = _conv(c.fs, t.fx[j], t.gx[j], c.xs, t.x[j]) - c.g2(j) / (2.0 * c.L)
    return [
        Term("cocoercivity(x_k, x_k+1)", 2.0 * c.th(k) ** 2,
             _coco(t.fx[k], t.fx[j], t.gx[k], t.gx[j], t.x[k], t.x[j], c.L)),
        Term("cocoercivity(x_star, x_k+1)", 2.0 * c.th(j), star),
    ]


def _terms_orc_flat(c: _Ctx, k: int) -> list:
    t = c.t
    star = _conv(c.fs, t.fx[k], t.gx[k], c.xs, t.x[k]) - c.g2(k) / (2.0 * c.L)
    return [
        Term("gradient_step(x_k)", c.phi(k + 1), _gradstep(t.fx[k], t.fy[k + 1], t.gx[k], c.L)),
        Term("convexity(y_k, x_k)", c.phi(k), _conv(t.fy[k], t.fx[k], t.gx[k], t.y[k], t.x[k])),
        Term("cocoercivity(x_star, x_k)", c.phi(k + 1) - c.phi(k), star),
    ]


def _terms_coord(c: _Ctx, k: int, i: int, y_next, fy_next) -> list:
    """Per-realization terms of a coordinate method when coordinate i is drawn."""
    t = c.t
    S = c.o.S
    Li = float(c.o.coordinate_L[i])
    gi = float(t.gx[k][i])
    r = S / math.sqrt(Li)
    if c.method == "orc-f":
        w_star, w_conv, w_step = c.phi(k + 1) - c.phi(k), c.phi(k), c.phi(k + 1)
    else:
        w_star, w_conv, w_step = c.th(k), c.th(k - 1) ** 2, c.th(k) ** 2
    sq = gi * gi / (2.0 * Li)
    star = c.fs - t.fx[k] - r * gi * (c.xs[i] - t.x[k][i])
    if c.method == "orc-f":
        star -= sq
    return [
        Term("coordinate_star(x_k)", w_star / S ** 2, float(star), inequality=False),
        Term("coordinate_convexity(y_k, x_k)", w_conv / S ** 2,
             float(t.fy[k] - t.fx[k] - r * gi * (t.y[k][i] - t.x[k][i])), inequality=False),
        Term("coordinate_gradient_step(x_k)", w_step / S ** 2, float(t.fx[k] - fy_next - sq)),
    ]


def _terms_fgm_bl(c: _Ctx, k: int) -> list:
    """U_{k,Lk[k]} - U_{k+1,Lk[k+1]}: the FGM terms at Lk[k+1] plus the estimate change."""
    t = c.t
    Ln = c.Lk(k + 1)
    return [
        Term("gradient_step(x_k)", c.th(k) ** 2 / Ln, _gradstep(t.fx[k], t.fy[k + 1], t.gx[k], Ln)),
        Term("convexity(y_k, x_k)", c.th(k - 1) ** 2 / Ln,
             _conv(t.fy[k], t.fx[k], t.gx[k], t.y[k], t.x[k])),
        Term("convexity(x_star, x_k)", c.th(k) / Ln, _conv(c.fs, t.fx[k], t.gx[k], c.xs, t.x[k])),
        Term("estimate_change", c.th(k - 1) ** 2 * (1.0 / c.Lk(k) - 1.0 / Ln), float(t.fy[k] - c.fs)),
    ]


def _terms_obl_flat(c: _Ctx, k: int) -> list:
    t = c.t
    j, j1 = max(k, 0), k + 1
    return [
        Term("cocoercivity(x_k, x_k+1)", (k + 1) * (k + 2) / 2.0,
             _coco(t.fx[j], t.fx[j1], t.gx[j], t.gx[j1], t.x[j], t.x[j1], c.L)),
        Term("convexity(x_star, x_k+1)", k + 2.0, _conv(c.fs, t.fx[j1], t.gx[j1], c.xs, t.x[j1])),
    ]


def _obl_f_jump(c: _Ctx, k: int) -> tuple[float, float]:
    """(E_k, its lower bound) for OBL-F; both vanish when L_k = L_{k+1}."""
    j = max(k, 0)
    Lk, Ln = c.Lk(k), c.Lk(k + 1)
    s = (k + 1) * (k + 2)
    g2 = c.g2(j)
    e = (-s / (2.0 * Ln) * (1.0 / (2.0 * Lk) - 1.0 / (2.0 * Ln)) * g2
         + s / 2.0 * (1.0 / Lk - 1.0 / Ln) * (c.t.fx[j] - c.fs - g2 / (2.0 * Lk)))
    lb = s / 4.0 * (1.0 / Ln ** 2 - 1.0 / Lk ** 2) * g2
    return float(e), float(lb)


def _terms_obl_f(c: _Ctx, k: int) -> list:
    t = c.t
    j, j1 = max(k, 0), k + 1
    Ln = c.Lk(k + 1)
    e, _ = _obl_f_jump(c, k)
    return [
        Term("cocoercivity(x_k, x_k+1)", (k + 1) * (k + 2) / (2.0 * Ln),
             _coco(t.fx[j], t.fx[j1], t.gx[j], t.gx[j1], t.x[j], t.x[j1], Ln)),
        Term("convexity(x_star, x_k+1)", (k + 2.0) / Ln, _conv(c.fs, t.fx[j1], t.gx[j1], c.xs, t.x[j1])),
        Term("jump_correction", 1.0, e, inequality=False),
    ]


def _terms_obl_g_flat(c: _Ctx, k: int) -> list:
    t, N = c.t, c.N
    m = N - k
    b0, _ = _obl_g_consts(N)
    cw = b0 if k == 0 else 2.0 / (m * (m + 1) * (m + 2))
    return [
        Term("cocoercivity(x_k, x_k+1)", 1.0 / (m * (m + 1)),
             _coco(t.fx[k], t.fx[k + 1], t.gx[k], t.gx[k + 1], t.x[k], t.x[k + 1], c.L)),
        Term("convexity(x_N, x_k)", cw, _conv(t.fx[N], t.fx[k], t.gx[k], t.x[N], t.x[k])),
    ]


def _terms_obl_g(c: _Ctx, k: int) -> list:
    t, N = c.t, c.N
    m = N - k
    b0, _ = _obl_g_consts(N)
    cw = b0 if k == 0 else 2.0 / (m * (m + 1) * (m + 2))
    Ln = c.Lk(k + 1)
    lit = float(t.fx[k] - t.fx[k + 1] + t.gx[k + 1] @ (t.x[k + 1] - t.y[k + 1])
                - (c.g2(k) + c.g2(k + 1)) / (2.0 * Ln))
    return [
        # not an interpolation inequality: y_{k+1} is a 1/L_k step, not 1/L_{k+1}
        Term("search_literal(x_k, x_k+1)", 1.0 / (m * (m + 1) * Ln), lit, inequality=False),
        Term("convexity(x_N, x_k)", cw / c.Lk(k), _conv(t.fx[N], t.fx[k], t.gx[k], t.x[N], t.x[k])),
        Term("jump_correction", 1.0, float(obl_g_correction(t, k)), inequality=False),
    ]


_TERMS = {
    "fgm": _terms_fgm,
    "ogm": _terms_ogm,
    "orc-f-flat": _terms_orc_flat,
    "fgm-bl": _terms_fgm_bl,
    "obl-f-flat": _terms_obl_flat,
    "obl-f": _terms_obl_f,
    "obl-g-flat": _terms_obl_g_flat,
    "obl-g": _terms_obl_g,
}


def _enumerate(c: _Ctx, k: int, U_k: float):
    """Conditional expectation of U_{k+1} and of the terms over the drawn coordinate."""
    t, o = c.t, c.o
    a, w = t.extra["a"], t.extra["w"]
    p = o.probabilities
    EU = 0.0
    Eterms = None
    for i in range(o.dim):
        yn, zn, _ = coordinate_step(o, t.x[k], t.z[k], t.gx[k], i, float(a[k]), float(w[k]))
        fyn = o.value(yn)
        d = zn - c.xs
        U_next = _coord_weight(c, k + 1) / o.S ** 2 * (fyn - c.fs) + 0.5 * float(d @ d)
        EU += p[i] * U_next
        ts = _terms_coord(c, k, i, yn, fyn)
        if Eterms is None:
            Eterms = [Term(x.name, x.multiplier, p[i] * x.residual, True) for x in ts]
        else:
            for e, x in zip(Eterms, ts):
                e.residual += p[i] * x.residual
    dec = U_k - EU
    ident = abs(dec - sum(e.value for e in Eterms))
    return float(dec), Eterms, float(ident)


def verify_decrement(method, trajectory: Trajectory, table: Optional[CoefficientTable] = None,
                     oracle: Optional[SmoothOracle] = None, tol: float = IDENTITY_RTOL) -> LyapunovReport:
    """Two-sided decrement check at every step of ``trajectory``."""
    if oracle is None:
        raise LyapunovError("an oracle with f_star and x_star is required")
    method = _check_method(method, trajectory, METHODS)
    c = _Ctx(method, trajectory, oracle, table)
    if method not in ("obl-g-flat", "obl-g"):
        c.need_xstar()
    lo, hi = _index_range(c)
    rep = LyapunovReport(method, c.N)
    value = _VALUE[method]
    randomized = method in RANDOMIZED
    for k in range(lo, hi):
        Uk = float(value(c, k))
        Un = float(value(c, k + 1))
        dec = Uk - Un
        scale = max(abs(Uk), abs(Un), 1.0)
        if randomized:
            i = int(trajectory.coords[k])
            terms = _terms_coord(c, k, i, trajectory.y[k + 1], trajectory.fy[k + 1])
        else:
            terms = _TERMS[method](c, k)
        ident = abs(dec - sum(x.value for x in terms))
        rec = StepRecord(k, Uk, Un, dec, terms, float(ident), scale)
        if ident > tol * scale:
            worst = max(terms, key=lambda x: abs(x.value)).name if terms else "none"
            rep.failures.append(f"k={k}: identity residual {ident:.3e} exceeds {tol:g}*{scale:.3g} "
                                f"(largest term {worst})")
        for x in terms:
            if x.inequality and x.multiplier * x.residual < -DECREMENT_RTOL * scale:
                rep.failures.append(f"k={k}: term {x.name} negative ({x.residual:.3e})")
        if randomized:
            edec, eterms, eident = _enumerate(c, k, Uk)
            rec.expected_decrement, rec.expected_terms, rec.expected_identity_residual = edec, eterms, eident
            if eident > tol * scale:
                rep.failures.append(f"k={k}: expected identity residual {eident:.3e}")
            if edec < -ENUM_ATOL * scale:
                rep.failures.append(f"k={k}: expected decrement {edec:.3e} negative")
        elif method in ("obl-f", "obl-g"):
            if method == "obl-f":
                rec.lower_bound = _obl_f_jump(c, k)[1]
                if terms[2].residual < rec.lower_bound - DECREMENT_RTOL * scale:
                    rep.failures.append(f"k={k}: jump correction {terms[2].residual:.3e} below its bound")
            else:
                rec.lower_bound = terms[2].residual
        elif dec < -DECREMENT_RTOL * scale:
            rep.failures.append(f"k={k}: decrement {dec:.3e} negative")
        rep.steps.append(rec)
    if method == "obl-f-flat":
        _sandwich(c, rep)
    if method == "obl-g":
        lits = [s.terms[0].residual for s in rep.steps]
        rep.extra["negative_literal_steps"] = [s.k for s in rep.steps if s.terms[0].residual < 0]
        rep.extra["literal_min"] = min(lits, default=0.0)
    if method in ("obl-f", "obl-g", "fgm-bl"):
        rep.extra["jumps"] = list(map(int, trajectory.jumps))
    return rep


def obl_f_tilde_value(c: _Ctx, k: int, shift: str = "sqrt") -> float:
    """U~_k = (sqrt s + s)(f(x~_k) - f_star) + (L/2)|z_k - (a/L) g(x~_k) - x_star|^2, s = k(k+1)/2.

    ``shift="sqrt"`` takes a = sqrt(s), the value for which U_{k-1} - U~_k
    decomposes exactly; ``shift="printed"`` takes a = s.
    """
    s = k * (k + 1) / 2.0
    a = math.sqrt(s) if shift == "sqrt" else s
    xt = obl_f_tilde(c.t, k)
    ft, gt = c.o.eval(xt)
    return float((math.sqrt(s) + s) * (ft - c.fs) + c.L / 2.0 * c.dist2(c.t.z[k] - a / c.L * gt))


def _sandwich(c: _Ctx, rep: LyapunovReport) -> None:
    """U~_k <= U_{k-1} for k = 1..N (k <= N-1 when x_N is the modified iterate),
    via U_{k-1} - U~_k = s coco(x_{k-1}, x~_k) + sqrt(s) conv(x_star, x~_k)."""
    kmax = c.N - 1 if c.last_step else c.N
    out = []
    t = c.t
    for k in range(1, kmax + 1):
        s = k * (k + 1) / 2.0
        xt = obl_f_tilde(t, k)
        ft, gt = c.o.eval(xt)
        ut = obl_f_tilde_value(c, k)
        up = float(_u_obl_flat(c, k - 1))
        terms = [Term("cocoercivity(x_k-1, x~_k)", s, _coco(t.fx[k - 1], ft, t.gx[k - 1], gt, t.x[k - 1], xt, c.L)),
                 Term("convexity(x_star, x~_k)", math.sqrt(s), _conv(c.fs, ft, gt, c.xs, xt))]
        scale = max(abs(ut), abs(up), 1.0)
        ident = abs(up - ut - sum(x.value for x in terms))
        printed = obl_f_tilde_value(c, k, "printed")
        out.append({"k": k, "U_tilde": ut, "U_prev": up, "identity_residual": ident,
                    "U_tilde_printed": printed, "printed_holds": printed <= up + DECREMENT_RTOL * scale})
        if ident > IDENTITY_RTOL * scale:
            rep.failures.append(f"k={k}: sandwich identity residual {ident:.3e}")
        if ut > up + DECREMENT_RTOL * scale:
            rep.failures.append(f"k={k}: sandwich U~_k {ut:.6e} > U_k-1 {up:.6e}")
    rep.extra["sandwich"] = out


# rates

@dataclass
class RateCheck:
    k: int
    label: str
    observed: float
    bound: float
    scale: float
    binding: bool = True     # False for bounds that hold only in expectation or are informational
    tol: float = RATE_RTOL

    @property
    def slack(self) -> float:
        return self.bound - self.observed

    @property
    def ok(self) -> bool:
        return (not self.binding) or self.slack >= -self.tol * self.scale


@dataclass
class RateReport:
    method: str
    N: int
    checks: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(ch.ok for ch in self.checks) and not self.extra.get("precondition_failed", False)

    @property
    def violations(self) -> list:
        return [ch for ch in self.checks if not ch.ok]

    @property
    def min_slack(self) -> float:
        return min((ch.slack / ch.scale for ch in self.checks if ch.binding), default=0.0)

    def to_dict(self) -> dict:
        return {"method": self.method, "N": self.N, "ok": self.ok,
                "checks": [dict(asdict(ch), slack=ch.slack, ok=ch.ok) for ch in self.checks],
                "extra": _jsonable(self.extra)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def rate_bound(method: str, k: int, L: float, R: float, table: Optional[CoefficientTable] = None,
               S: Optional[float] = None) -> float:
    """Closed-form distance-based bound of ``method`` for the gap at index k.

    fgm, orc-f-flat, obl-f-flat: gap of y_{k+1}; obl-f-flat-tilde: gap of x~_k;
    ogm: gap of x_k (last-step run with N = k); orc-f, fgm-rc-sharp: expected
    gap of y_{k+1}; fgm-rc: expected gap of y_k.
    """
    t = table or default_table()
    R2 = R * R
    if method == "fgm":
        return L * R2 / (2.0 * t.theta(k) ** 2)
    if method == "ogm":
        return L * R2 / (2.0 * t.theta_tilde(k) ** 2)
    if method == "orc-f-flat":
        return L * R2 / (2.0 * t.phi(k + 1))
    if method == "obl-f-flat":
        return L * R2 / ((k + 1) * (k + 2))
    if method == "obl-f-flat-tilde":
        return L * R2 / (k * (k + 1) + math.sqrt(2.0 * k * (k + 1)))
    if method == "orc-f":
        return S ** 2 * R2 / (2.0 * t.phi(k + 1))
    if method == "fgm-rc-sharp":
        return S ** 2 * R2 / (2.0 * t.theta(k) ** 2)
    if method == "fgm-rc":
        return 2.0 * S ** 2 * R2 / (k + 1) ** 2
    raise ValueError(f"no distance-based rate for {method!r}")


def obl_g_flat_tau(N: int, L: float) -> float:
    """Gradient-norm rate constant 4 L c0 / (1 + 2 c0)."""
    _, c0 = _obl_g_consts(N)
    return 4.0 * L * c0 / (1.0 + 2.0 * c0)


def obl_g_flat_tau_closed(N: int, L: float) -> float:
    """The same constant written as 4L (N^2+N-r) / (N^2 (N+1)^2 - 2r), r = sqrt(2N(N+1))."""
    r = math.sqrt(2.0 * N * (N + 1))
    return 4.0 * L * (N * N + N - r) / (N * N * (N + 1) ** 2 - 2.0 * r)


def verify_rate(method, trajectory: Trajectory, table: Optional[CoefficientTable] = None,
                oracle: Optional[SmoothOracle] = None, tol: float = RATE_RTOL) -> RateReport:
    """Observed quantity vs closed-form bound at every applicable index."""
    if oracle is None:
        raise LyapunovError("an oracle with f_star is required")
    method = _check_method(method, trajectory, RATE_METHODS)
    c = _Ctx(method, trajectory, oracle, table)
    t, N, L, fs = trajectory, trajectory.N, c.L, c.fs
    rep = RateReport(method, N)
    tab = c.tab
    R = None if c.xs is None else math.sqrt(c.dist2(t.x[0]))
    f0 = float(t.fx[0] - fs)

    def add(k, label, obs, bound, scale, binding=True):
        rep.checks.append(RateCheck(k, label, float(obs), float(bound), float(scale), binding, tol))

    def need_R():
        if R is None:
            raise LyapunovError(f"{method} rate needs x_star")
        return R

    if method in ("fgm", "orc-f-flat"):
        LR2 = L * need_R() ** 2
        for k in range(N + 1):
            add(k, "f(y_k+1)-f*", t.fy[k + 1] - fs, rate_bound(method, k, L, R, tab), max(LR2, 1.0))
    elif method == "ogm":
        if not c.last_step:
            raise LyapunovError("the OGM rate needs the last-step modification")
        add(N, "f(x_N)-f*", t.fx[N] - fs, rate_bound("ogm", N, L, need_R(), tab), max(L * R * R, 1.0))
    elif method == "ogm-g":
        bound = 2.0 * L * f0 / tab.theta_tilde(N) ** 2
        add(N, "|g(x_N)|^2", c.g2(N), bound, max(L * f0, 1.0))
        if R is not None:
            add(N, "|g(x_N)|^2 vs L^2R^2", c.g2(N), L * L * R * R / tab.theta_tilde(N) ** 2,
                max(L * L * R * R, 1.0))
    elif method in ("orc-f", "fgm-rc-sharp", "fgm-rc"):
        S = oracle.S
        sc = max(S * S * need_R() ** 2, 1.0)
        for k in range(N + 1):
            if method == "fgm-rc":
                add(k + 1, "f(y_k+1)-f* (in expectation)", t.fy[k + 1] - fs,
                    rate_bound("fgm-rc", k + 1, L, R, tab, S), sc, binding=False)
            else:
                add(k, "f(y_k+1)-f* (in expectation)", t.fy[k + 1] - fs,
                    rate_bound(method, k, L, R, tab, S), sc, binding=False)
        rep.extra["in_expectation"] = True
    elif method == "fgm-bl":
        R2 = need_R() ** 2
        for k in range(N):
            add(k, "f(y_k+1)-f*", t.fy[k + 1] - fs, t.Lk[k + 1] * R2 / (2.0 * tab.theta(k) ** 2),
                max(t.Lk[k + 1] * R2, 1.0))
    elif method == "obl-f-flat":
        LR2 = L * need_R() ** 2
        kmax = N - 1 if c.last_step else N
        for k in range(1, kmax + 1):
            xt = obl_f_tilde(t, k)
            add(k, "f(x~_k)-f*", oracle.value(xt) - fs, rate_bound("obl-f-flat-tilde", k, L, R), max(LR2, 1.0))
        if c.last_step:
            add(N, "f(x_N)-f* (x_N = x~_N)", t.fx[N] - fs, rate_bound("obl-f-flat-tilde", N, L, R),
                max(LR2, 1.0))
        for k in range(0, kmax):
            add(k, "f(y_k+1)-f*", t.fy[k + 1] - fs, rate_bound("obl-f-flat", k, L, R), max(LR2, 1.0))
    elif method == "obl-f":
        R2 = need_R() ** 2
        LN = float(t.Lk[N])
        pre = _gradstep(t.fx[N], t.fy[N + 1], t.gx[N], LN)
        rep.extra["final_gradient_step_residual"] = pre
        rep.extra["precondition_failed"] = pre < -tol * max(abs(t.fx[N]), 1.0)
        rep.extra["LN_over_L"] = LN / L
        js = float(t.extra["jump_sum_proof"])
        sc = max(LN * R2, 1.0)
        add(N + 1, "f(y_N+1)-f* (jump-corrected)", t.fy[N + 1] - fs,
            LN / ((N + 1) * (N + 2)) * (R2 + js), sc)
        add(N + 1, "f(y_N+1)-f* (statement jump sum)", t.fy[N + 1] - fs,
            LN / ((N + 1) * (N + 2)) * (R2 + float(t.extra["jump_sum_statement"])), sc, binding=False)
    elif method == "obl-g-flat":
        add(N, "|g(x_N)|^2", c.g2(N), obl_g_flat_tau(N, L) * f0, max(L * f0, 1.0))
        add(N, "|g(x_N)|^2 (closed form)", c.g2(N), obl_g_flat_tau_closed(N, L) * f0, max(L * f0, 1.0))
        add(N, "|g(x_N)|^2 vs 4L/N^2", c.g2(N), 4.0 * L / N ** 2 * f0, max(L * f0, 1.0))
    elif method == "obl-g":
        _, c0 = _obl_g_consts(N)
        LN, L0 = float(t.Lk[N]), float(t.Lk[0])
        corr = sum(obl_g_correction(t, k) for k in range(N))
        lhs = c.g2(N) / (4.0 * LN ** 2) + corr
        drop = float(t.fx[0] - t.fx[N])
        sc = max(abs(lhs), drop / L0, 1.0)
        add(N, "|g_N|^2/4L_N^2 + jump sum (proof form)", lhs, c0 / L0 * drop, sc)
        add(N, "|g_N|^2/4L_N^2 + jump sum (statement form)", lhs, drop / (N + 1) ** 2, sc, binding=False)
        rep.extra["jump_sum"] = corr
    else:
        raise LyapunovError(f"no rate for {method!r}")
    return rep


def telescoped_bound(report: LyapunovReport, method: str, k: int, L: float,
                     table: Optional[CoefficientTable] = None, S: Optional[float] = None) -> float:
    """Rate bound obtained by chaining U_{k+1} <= U_first and dividing by the gap weight."""
    t = table or default_table()
    U0 = report.steps[0].U
    if method == "fgm":
        return U0 / t.theta(k) ** 2
    if method == "orc-f-flat":
        return U0 / t.phi(k + 1)
    if method == "obl-f-flat":
        return U0 / ((k + 1) * (k + 2) / 2.0)
    if method == "orc-f":
        return U0 * S ** 2 / t.phi(k + 1)
    if method == "fgm-rc-sharp":
        return U0 * S ** 2 / t.theta(k) ** 2
    raise ValueError(f"no telescoped bound for {method!r}")
