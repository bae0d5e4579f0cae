"""Randomized coordinate and backtracking line-search methods.

Coordinate methods share one template: with i = i(k) drawn with
probability sqrt(L_i)/S,

    y_{k+1} = x_k - grad_i f(x_k) e_i / L_i
    z_{k+1} = z_k - a_k grad_i f(x_k) e_i / (S sqrt(L_i))
    x_{k+1} = w_k y_{k+1} + (1 - w_k) z_{k+1}

Line-search methods grow the smoothness estimate by eta until the
search inequality holds at the candidate step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .coeffs import CoefficientTable, default_table
from .fsfo import Trajectory
from .oracles import SmoothOracle

MAX_BACKTRACKS = 200
SEARCH_RTOL = 1e-12
MASK64 = (1 << 64) - 1


class SplitMix64:
    """64-bit splitmix generator; identical draws on every platform."""

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        """Uniform on [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))


@dataclass
class CoordinateSampler:
    probabilities: np.ndarray
    seed: int
    rng: SplitMix64 = field(init=False, repr=False)
    cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.ndim != 1 or p.size == 0 or np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be positive and sum to 1")
        self.probabilities = p
        self.cdf = np.cumsum(p)
        self.rng = SplitMix64(self.seed)

    @classmethod
    def for_oracle(cls, oracle: SmoothOracle, seed: int) -> "CoordinateSampler":
        if oracle.coordinate_L is None:
            raise ValueError(f"oracle {oracle.name} has no coordinate smoothness constants")
        return cls(oracle.probabilities, seed)

    def draw(self) -> int:
        u = self.rng.next_float()
        i = int(np.searchsorted(self.cdf, u, side="left"))
        return min(i, self.cdf.size - 1)


@dataclass
class LinesearchState:
    L0: float
    eta: float
    L: float = field(init=False)
    jumps: list = field(default_factory=list)
    backtracks: int = 0

    def __post_init__(self):
        if not (self.L0 > 0 and math.isfinite(self.L0)):
            raise ValueError("L0 must be positive and finite")
        if not (self.eta > 1 and math.isfinite(self.eta)):
            raise ValueError("eta must exceed 1")
        self.L = float(self.L0)

    def search(self, k: int, accept: Callable[[float], bool]) -> float:
        """Smallest eta^i * L with accept(.) true; records a jump at k when i > 0."""
        cand = self.L
        for i in range(MAX_BACKTRACKS + 1):
            if accept(cand):
                if i > 0:
                    self.jumps.append(k)
                    self.backtracks += i
                self.L = cand
                return cand
            cand *= self.eta
        raise RuntimeError(f"line search exceeded {MAX_BACKTRACKS} backtracks at step {k}; "
                           "oracle is probably not smooth")


def _validate(oracle: SmoothOracle, x0, N: int, min_n: int = 1) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != oracle.dim:
        raise ValueError(f"x0 has dimension {x0.shape[0]}, oracle expects {oracle.dim}")
    if isinstance(N, bool) or int(N) != N or N < min_n:
        raise ValueError(f"horizon must be an integer >= {min_n}, got {N}")
    return x0


def _finite(k: int, *arrs) -> None:
    for a in arrs:
        if not np.all(np.isfinite(a)):
            raise FloatingPointError(f"non-finite iterate at step {k}")


# randomized coordinate methods

def coordinate_coefficients(method: str, N: int, table: Optional[CoefficientTable] = None):
    """(a_k, w_k) for k = 0..N of a coordinate method."""
    t = table or default_table()
    k = np.arange(N + 1)
    if method == "orc-f":
        phi = t.phi_array(N + 3)
        return phi[1:N + 2] - phi[:N + 1], phi[1:N + 2] / phi[2:N + 3]
    if method == "fgm-rc":
        return (k + 2) / 2.0, (k + 1) / (k + 3.0)
    if method == "fgm-rc-sharp":
        th = t.theta_array(N + 2)
        return th[:N + 1], 1.0 - 1.0 / th[1:N + 2]
    raise ValueError(f"unknown coordinate method {method!r}")


def coordinate_step(oracle: SmoothOracle, x, z, gx, i: int, a: float, w: float):
    """One coordinate update given the drawn index; returns (y, z, x)."""
    Li = float(oracle.coordinate_L[i])
    S = oracle.S
    y = x.copy()
    y[i] -= gx[i] / Li
    zn = z.copy()
    # L_i (S / sqrt L_i) = S sqrt L_i, exact when n = 1
    zn[i] -= a * gx[i] / (Li * (S / math.sqrt(Li)))
    return y, zn, w * y + (1.0 - w) * zn


def _run_coordinate(method: str, oracle: SmoothOracle, x0, N: int, seed: int,
                    table: Optional[CoefficientTable] = None) -> Trajectory:
    x0 = _validate(oracle, x0, N)
    sampler = CoordinateSampler.for_oracle(oracle, seed)
    a, w = coordinate_coefficients(method, N, table)
    n = oracle.dim
    x = np.zeros((N + 1, n))
    gx = np.zeros((N + 1, n))
    fx = np.zeros(N + 1)
    y = np.zeros((N + 2, n))
    z = np.zeros((N + 2, n))
    fy = np.zeros(N + 2)
    coords = np.zeros(N + 1, dtype=int)
    x[0] = y[0] = z[0] = x0
    xk = x0
    for k in range(N + 1):
        fx[k], gx[k] = oracle.eval(xk)
        i = sampler.draw()
        coords[k] = i
        y[k + 1], z[k + 1], xn = coordinate_step(oracle, xk, z[k], gx[k], i, a[k], w[k])
        _finite(k, y[k + 1], z[k + 1], xn)
        if k < N:
            x[k + 1] = xk = xn
    fy[:] = [oracle.value(v) for v in y]
    return Trajectory(method, N, x, fx, gx, y=y, z=z, fy=fy, coords=coords,
                      oracle_name=oracle.name, seed=seed, L=oracle.L,
                      extra={"a": a, "w": w, "S": oracle.S})


def run_orc_f(oracle: SmoothOracle, x0, N: int, seed: int, table=None) -> Trajectory:
    return _run_coordinate("orc-f", oracle, x0, N, seed, table)


def run_fgm_rc(oracle: SmoothOracle, x0, N: int, seed: int, sharp: bool = False,
               table=None) -> Trajectory:
    return _run_coordinate("fgm-rc-sharp" if sharp else "fgm-rc", oracle, x0, N, seed, table)


def orc_f_bound(k: int, S: float, R: float, table=None) -> float:
    """E f(y_{k+1}) - f_star bound of ORC-F."""
    return S ** 2 * R ** 2 / (2.0 * (table or default_table()).phi(k + 1))


def fgm_rc_sharp_bound(k: int, S: float, R: float, table=None) -> float:
    """E f(y_{k+1}) - f_star bound of FGM-RC-sharp."""
    return S ** 2 * R ** 2 / (2.0 * (table or default_table()).theta(k) ** 2)


# backtracking line searches

def _coco(fa, ga, xa, fb, gb, xb, Lc) -> float:
    """f(a) - f(b) - |g(a) - g(b)|^2 / 2L + <g(b), b - a>."""
    d = ga - gb
    return float(fa - fb - d @ d / (2.0 * Lc) + gb @ (xb - xa))


def _accept(val: float, *mags: float) -> bool:
    return val >= -SEARCH_RTOL * max(1.0, *map(abs, mags))


def run_obl_f(oracle: SmoothOracle, x0, N: int, L0: float, eta: float = 2.0,
              z_uses_previous: bool = True) -> Trajectory:
    """OBL-F. The z-step at k uses the estimate L_k in force before the
    search (``z_uses_previous``); the y-step uses the candidate L_{k+1}."""
    x0 = _validate(oracle, x0, N)
    st = LinesearchState(L0, eta)
    n = oracle.dim
    x = np.zeros((N + 1, n))
    gx = np.zeros((N + 1, n))
    fx = np.zeros(N + 1)
    y = np.zeros((N + 2, n))
    z = np.zeros((N + 2, n))
    Lk = np.zeros(N + 1)
    x[0] = y[0] = z[0] = x0
    fx[0], gx[0] = oracle.eval(x0)
    Lk[0] = st.L
    jump_proof = 0.0
    jump_stmt = 0.0
    for k in range(N):
        Lprev = st.L
        trial = {}

        def accept(Lc, k=k, Lprev=Lprev):
            yk = x[k] - gx[k] / Lc
            zk = z[k] - (k + 1) * gx[k] / (Lprev if z_uses_previous else Lc)
            xn = ((k + 1) * yk + 2.0 * zk) / (k + 3)
            _finite(k, xn)
            fn, gn = oracle.eval(xn)
            trial.update(y=yk, z=zk, x=xn, f=fn, g=gn)
            return _accept(_coco(fx[k], gx[k], x[k], fn, gn, xn, Lc), fx[k], fn)

        Lnew = st.search(k, accept)
        y[k + 1], z[k + 1], x[k + 1] = trial["y"], trial["z"], trial["x"]
        fx[k + 1], gx[k + 1] = trial["f"], trial["g"]
        Lk[k + 1] = Lnew
        if Lnew > Lprev:
            coef = (k + 1) * (k + 2) / 2.0 * (1.0 / Lprev ** 2 - 1.0 / Lnew ** 2)
            jump_proof += coef * float(gx[k] @ gx[k])
            jump_stmt += coef * float(gx[k + 1] @ gx[k + 1])
    y[N + 1] = x[N] - gx[N] / Lk[N]
    z[N + 1] = z[N] - (N + 1) * gx[N] / Lk[N]
    fy = np.array([oracle.value(v) for v in y])
    return Trajectory("obl-f", N, x, fx, gx, y=y, z=z, fy=fy, Lk=Lk, jumps=list(st.jumps),
                      oracle_name=oracle.name, L=oracle.L,
                      extra={"L0": L0, "eta": eta, "backtracks": st.backtracks,
                             "jump_sum_proof": jump_proof, "jump_sum_statement": jump_stmt,
                             "z_uses_previous": z_uses_previous})


def obl_g_coefficients(N: int):
    """(a_k, w_k) for k = 0..N-1 of OBL-G."""
    a = np.empty(N)
    w = np.empty(N)
    a[0] = (1.0 + math.sqrt(N * (N + 1) / 2.0)) / 2.0
    w[0] = (N - 2.0) / (N + 2.0)
    for k in range(1, N):
        a[k] = (N - k + 1) / 2.0
        w[k] = (N - k - 2.0) / (N - k + 2.0)
    return a, w


def run_obl_g(oracle: SmoothOracle, x0, N: int, L0: float, eta: float = 2.0,
              step_estimate: str = "previous") -> Trajectory:
    """OBL-G with the OBL-F search condition.

    ``step_estimate="previous"`` takes both the y- and z-steps of step k
    with L_k and then searches L_{k+1} on the resulting pair; this is the
    variant whose decrement identity is exact. ``"printed"`` takes both
    steps with the candidate L_{k+1}.
    """
    if step_estimate not in ("previous", "printed"):
        raise ValueError("step_estimate must be 'previous' or 'printed'")
    x0 = _validate(oracle, x0, N, min_n=3)
    st = LinesearchState(L0, eta)
    a, w = obl_g_coefficients(N)
    n = oracle.dim
    x = np.zeros((N + 1, n))
    gx = np.zeros((N + 1, n))
    fx = np.zeros(N + 1)
    y = np.zeros((N + 1, n))
    z = np.zeros((N + 1, n))
    Lk = np.zeros(N + 1)
    x[0] = y[0] = z[0] = x0
    fx[0], gx[0] = oracle.eval(x0)
    Lk[0] = st.L
    literal_min = math.inf
    for k in range(N):
        Lprev = st.L
        trial = {}

        def accept(Lc, k=k, Lprev=Lprev):
            Ls = Lprev if step_estimate == "previous" else Lc
            if "x" not in trial or step_estimate == "printed":
                yk = x[k] - gx[k] / Ls
                zk = z[k] - a[k] * gx[k] / Ls
                xn = w[k] * yk + (1.0 - w[k]) * zk
                _finite(k, xn)
                fn, gn = oracle.eval(xn)
                trial.update(y=yk, z=zk, x=xn, f=fn, g=gn)
            return _accept(_coco(fx[k], gx[k], x[k], trial["f"], trial["g"], trial["x"], Lc),
                           fx[k], trial["f"])

        Lk[k + 1] = st.search(k, accept)
        y[k + 1], z[k + 1], x[k + 1] = trial["y"], trial["z"], trial["x"]
        fx[k + 1], gx[k + 1] = trial["f"], trial["g"]
        literal_min = min(literal_min, obl_g_literal_term(fx, gx, x, y, k, Lk[k + 1]))
    fy = np.array([oracle.value(v) for v in y])
    traj = Trajectory("obl-g", N, x, fx, gx, y=y, z=z, fy=fy, Lk=Lk, jumps=list(st.jumps),
                      oracle_name=oracle.name, L=oracle.L,
                      extra={"L0": L0, "eta": eta, "backtracks": st.backtracks,
                             "step_estimate": step_estimate, "literal_min": literal_min})
    traj.extra["jump_sum"] = obl_g_jump_sum(traj)
    return traj


def obl_g_literal_term(fx, gx, x, y, k: int, Lnext: float) -> float:
    """f(x_k) - f(x_{k+1}) + <g_{k+1}, x_{k+1} - y_{k+1}> - (|g_k|^2 + |g_{k+1}|^2) / 2L_{k+1}.

    Equals the cocoercivity residual at L_{k+1} when y_{k+1} is a 1/L_{k+1} step.
    """
    return float(fx[k] - fx[k + 1] + gx[k + 1] @ (x[k + 1] - y[k + 1])
                 - (gx[k] @ gx[k] + gx[k + 1] @ gx[k + 1]) / (2.0 * Lnext))


def obl_g_jump_sum(traj: Trajectory) -> float:
    """sum over jumps of (1/((N-k)(N-k+1))) (1/L_k - 1/L_{k+1}) (f(x_k) - (1/L_k + 1/L_{k+1})|g_k|^2/2 - f(x_N))."""
    return float(sum(obl_g_correction(traj, k) for k in traj.jumps))


def obl_g_correction(traj: Trajectory, k: int) -> float:
    N, Lk = traj.N, traj.Lk
    g2 = float(traj.gx[k] @ traj.gx[k])
    return (1.0 / ((N - k) * (N - k + 1)) * (1.0 / Lk[k] - 1.0 / Lk[k + 1])
            * (traj.fx[k] - 0.5 * (1.0 / Lk[k] + 1.0 / Lk[k + 1]) * g2 - traj.fx[N]))


def run_fgm_bl(oracle: SmoothOracle, x0, N: int, L0: float, eta: float = 2.0,
               table: Optional[CoefficientTable] = None) -> Trajectory:
    """FGM with sufficient-decrease backtracking on the gradient step.

    Lk[0] = L0 and step k uses Lk[k+1], so y_N is produced with Lk[N].
    """
    x0 = _validate(oracle, x0, N)
    th = (table or default_table()).theta_array(N + 2)
    st = LinesearchState(L0, eta)
    n = oracle.dim
    x = np.zeros((N + 1, n))
    gx = np.zeros((N + 1, n))
    fx = np.zeros(N + 1)
    y = np.zeros((N + 1, n))
    z = np.zeros((N + 1, n))
    fy = np.zeros(N + 1)
    Lk = np.zeros(N + 1)
    x[0] = y[0] = z[0] = x0
    fx[0], gx[0] = oracle.eval(x0)
    fy[0] = fx[0]
    Lk[0] = st.L
    for k in range(N):
        trial = {}

        def accept(Lc, k=k):
            yk = x[k] - gx[k] / Lc
            _finite(k, yk)
            fyk = oracle.value(yk)
            trial.update(y=yk, f=fyk)
            val = fx[k] - fyk - float(gx[k] @ gx[k]) / (2.0 * Lc)
            return _accept(val, fx[k], fyk)

        Lc = st.search(k, accept)
        Lk[k + 1] = Lc
        y[k + 1], fy[k + 1] = trial["y"], trial["f"]
        z[k + 1] = z[k] - th[k] * gx[k] / Lc
        x[k + 1] = (1.0 - 1.0 / th[k + 1]) * y[k + 1] + z[k + 1] / th[k + 1]
        _finite(k, x[k + 1])
        fx[k + 1], gx[k + 1] = oracle.eval(x[k + 1])
    return Trajectory("fgm-bl", N, x, fx, gx, y=y, z=z, fy=fy, Lk=Lk, jumps=list(st.jumps),
                      oracle_name=oracle.name, L=oracle.L,
                      extra={"L0": L0, "eta": eta, "backtracks": st.backtracks})


def fgm_bl_bound(traj: Trajectory, R: float, table=None) -> float:
    """L_N R^2 / (2 theta_{N-1}^2)."""
    th = (table or default_table()).theta(traj.N - 1)
    return traj.Lk[traj.N] * R ** 2 / (2.0 * th ** 2)
