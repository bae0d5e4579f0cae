"""Fixed-step first-order methods in canonical h-matrix form.

x_{i+1} = x_i - (1/L) sum_{k<=i} h_{i+1,k} grad f(x_k)

Every built-in method is described by a three-sequence generator

    y_{k+1} = x_k - g_k / L
    z_{k+1} = z_k - a_k g_k / L
    x_{k+1} = w_k y_{k+1} + (1 - w_k) z_{k+1}

which is unrolled into h by forward accumulation of the iterate
coefficients s_{k,j} (x_k = x_0 - (1/L) sum_j s_{k,j} g_j).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .coeffs import CoefficientTable, default_table
from .oracles import SmoothOracle

CONSISTENCY_RTOL = 1e-9


class Method(str, Enum):
    GD = "gd"
    FGM = "fgm"
    OGM = "ogm"
    OGM_G = "ogm-g"
    ORC_F_FLAT = "orc-f-flat"
    OBL_F_FLAT = "obl-f-flat"
    OBL_G_FLAT = "obl-g-flat"
    CUSTOM = "custom"


MIN_HORIZON = {Method.OBL_G_FLAT: 3}


def generator(method: Method, N: int, table: Optional[CoefficientTable] = None,
              last_step: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Per-step (a_k, w_k) for k = 0..N, the z coefficient and the mixing weight on y.

    Entry N is the continuation step past the horizon (NaN when the method
    has no natural continuation). ``last_step=False`` drops the final-step
    modification of OGM and OBL-F-flat.
    """
    method = Method(method)
    t = table or default_table()
    a = np.full(N + 1, np.nan)
    w = np.full(N + 1, np.nan)
    if method is Method.GD:
        a[:] = 1.0
        w[:] = 1.0
    elif method is Method.FGM:
        for k in range(N + 1):
            a[k] = t.theta(k)
            w[k] = 1.0 - 1.0 / t.theta(k + 1)
    elif method is Method.OGM:
        for k in range(N + 1):
            a[k] = 2.0 * t.theta(k)
            w[k] = 1.0 - 1.0 / t.theta(k + 1)
        if last_step:
            w[N - 1] = 1.0 - 1.0 / t.theta_tilde(N)
            a[N] = w[N] = np.nan
    elif method is Method.OGM_G:
        tt = t.theta_tilde(N)
        a[0] = 0.5 * (1.0 + tt)
        w[0] = t.theta(N - 1) ** 4 / tt ** 4
        for k in range(1, N):
            a[k] = t.theta(N - k)
            w[k] = t.theta(N - k - 1) ** 4 / t.theta(N - k) ** 4
    elif method is Method.ORC_F_FLAT:
        for k in range(N + 1):
            a[k] = t.phi(k + 1) - t.phi(k)
            w[k] = t.phi(k + 1) / t.phi(k + 2)
    elif method is Method.OBL_F_FLAT:
        for k in range(N + 1):
            a[k] = k + 1.0
            w[k] = (k + 1.0) / (k + 3.0)
        if last_step:
            r = math.sqrt(N * (N + 1) / 2.0)
            w[N - 1] = r / (r + 1.0)
            a[N] = w[N] = np.nan
    elif method is Method.OBL_G_FLAT:
        a[0] = 0.5 * (1.0 + math.sqrt(N * (N + 1) / 2.0))
        w[0] = (N - 2.0) / (N + 2.0)
        for k in range(1, N):
            a[k] = 0.5 * (N - k + 1.0)
            w[k] = (N - k - 2.0) / (N - k + 2.0)
    else:
        raise ValueError(f"{method.value} has no three-sequence generator")
    return a, w


def unroll(a: np.ndarray, w: np.ndarray, N: int) -> np.ndarray:
    """h-matrix (rows/cols 0..N) from generator coefficients for steps 0..N-1."""
    s = np.zeros(N + 1)       # coefficients of x_k
    zc = np.zeros(N + 1)      # coefficients of z_k
    h = np.zeros((N + 1, N + 1))
    for k in range(N):
        zc[k] += a[k]
        y = s.copy()
        y[k] += 1.0
        nxt = w[k] * y + (1.0 - w[k]) * zc
        h[k + 1] = nxt - s
        s = nxt
    return h


@dataclass(frozen=True)
class FsfoSchedule:
    N: int
    h: np.ndarray
    method: Method
    metadata: dict = field(default_factory=dict)

    def s(self) -> np.ndarray:
        """Cumulative coefficients: x_i = x_0 - (1/L) sum_k s[i, k] g_k."""
        return np.cumsum(self.h, axis=0)

    def row(self, i: int) -> np.ndarray:
        return self.h[i, :i].copy()


def build_schedule(method, N: int, table: Optional[CoefficientTable] = None,
                   last_step: bool = True, h: Optional[np.ndarray] = None) -> FsfoSchedule:
    method = Method(method)
    if int(N) != N or N < 1:
        raise ValueError(f"horizon must be a positive integer, got {N}")
    N = int(N)
    if N < MIN_HORIZON.get(method, 1):
        raise ValueError(f"{method.value} needs N >= {MIN_HORIZON[method]}, got {N}")
    if method is Method.CUSTOM:
        if h is None:
            raise ValueError("custom schedules need an explicit h-matrix")
        h = np.array(h, dtype=float)
        if h.shape != (N + 1, N + 1):
            raise ValueError(f"h must be {(N + 1, N + 1)}")
        return FsfoSchedule(N, np.tril(h, -1), method, {"custom": True})
    a, w = generator(method, N, table, last_step)
    meta = {"a": a[:N].tolist(), "w": w[:N].tolist(), "last_step": last_step}
    return FsfoSchedule(N, unroll(a, w, N), method, meta)


def obl_g_flat_h(N: int) -> np.ndarray:
    """The explicit closed-form H for OBL-G-flat (independent of the unroll)."""
    if N < 3:
        raise ValueError("needs N >= 3")
    h = np.zeros((N + 1, N + 1))
    rt = math.sqrt(N * (N + 1) / 2.0)
    b0 = 2.0 * (rt - 1.0) / ((N - 1) * N * (N + 1) * (N + 2))
    h[1, 0] = (N + math.sqrt(2.0 * N * (N + 1))) / (N + 2)
    for i in range(2, N):
        h[i, i - 1] = 3.0 * (N - i + 1) / (N - i + 3)
        h[i, 0] = (N * (N - 2) - (i - 2) * (2 * N - i)) * (N - i + 1) * b0
        for j in range(1, i - 1):
            h[i, j] = (2.0 * (N - i) * (N - i + 1) * (N - i + 2)
                       / ((N - j) * (N - j + 1) * (N - j + 2)))
    h[N, N - 1] = 1.0
    return h


@dataclass
class Trajectory:
    """Iterates of one run.

    ``x`` has N+1 rows. ``y`` and ``z`` have N+2 rows; row N+1 is the
    look-ahead point past the horizon (NaN when undefined).
    """

    method: str
    N: int
    x: np.ndarray
    fx: np.ndarray
    gx: np.ndarray
    y: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    fy: Optional[np.ndarray] = None
    Lk: Optional[np.ndarray] = None
    coords: Optional[np.ndarray] = None
    jumps: list = field(default_factory=list)
    oracle_name: str = ""
    seed: Optional[int] = None
    L: float = float("nan")
    extra: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.x.shape[0]

    def jump_flags(self) -> np.ndarray:
        flags = np.zeros(self.N + 1, dtype=int)
        for k in self.jumps:
            if 0 <= k <= self.N:
                flags[k] = 1
        return flags

    def rows(self, f_star: float) -> list[dict]:
        Lk = self.Lk if self.Lk is not None else np.full(self.N + 1, self.L)
        flags = self.jump_flags()
        return [
            {"k": k, "f_gap": float(self.fx[k] - f_star),
             "grad_norm_sq": float(self.gx[k] @ self.gx[k]),
             "Lk": float(Lk[k]), "jump_flag": int(flags[k])}
            for k in range(self.N + 1)
        ]

    def to_csv(self, f_star: float, extra_columns: Optional[dict] = None) -> str:
        rows = self.rows(f_star)
        cols = ["k", "f_gap", "grad_norm_sq", "Lk", "jump_flag"]
        extra_columns = extra_columns or {}
        cols += list(extra_columns)
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(cols)
        for r in rows:
            out = [r["k"], fmt(r["f_gap"]), fmt(r["grad_norm_sq"]), fmt(r["Lk"]), r["jump_flag"]]
            for name in extra_columns:
                v = extra_columns[name][r["k"]]
                out.append("" if v is None or (isinstance(v, float) and math.isnan(v)) else fmt(v))
            wr.writerow(out)
        return buf.getvalue()

    def to_json(self, f_star: float) -> str:
        return json.dumps({
            "method": self.method, "N": self.N, "oracle": self.oracle_name,
            "seed": self.seed, "jumps": list(map(int, self.jumps)),
            "rows": self.rows(f_star),
        }, indent=2)


def fmt(v: float) -> str:
    """Round-trippable 17 significant digits."""
    return format(float(v), ".17g")


def run_fsfo(schedule: FsfoSchedule, oracle: SmoothOracle, x0, L: Optional[float] = None,
             check: bool = True, table: Optional[CoefficientTable] = None) -> Trajectory:
    """Execute the h-matrix recursion and, for built-in methods, replay the
    three-sequence form to confirm both agree."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != oracle.dim:
        raise ValueError(f"x0 has dimension {x0.shape[0]}, oracle expects {oracle.dim}")
    L = oracle.L if L is None else float(L)
    N = schedule.N
    n = oracle.dim
    x = np.zeros((N + 1, n))
    g = np.zeros((N + 1, n))
    fx = np.zeros(N + 1)
    x[0] = x0
    for i in range(N + 1):
        fx[i], g[i] = oracle.eval(x[i])
        if not (np.all(np.isfinite(x[i])) and np.isfinite(fx[i]) and np.all(np.isfinite(g[i]))):
            raise FloatingPointError(f"non-finite iterate at step {i} of {schedule.method.value}")
        if i < N:
            x[i + 1] = x[i] - schedule.h[i + 1, : i + 1] @ g[: i + 1] / L
    traj = Trajectory(schedule.method.value, N, x, fx, g, oracle_name=oracle.name, L=L,
                      extra={"last_step": schedule.metadata.get("last_step", True)})
    if schedule.method is Method.CUSTOM:
        return traj
    a, w = generator(schedule.method, N, table, schedule.metadata.get("last_step", True))
    y = np.full((N + 2, n), np.nan)
    z = np.full((N + 2, n), np.nan)
    y[0] = z[0] = x0
    xr = x0.copy()
    for k in range(N + 1):
        y[k + 1] = x[k] - g[k] / L
        if not math.isnan(a[k]):
            z[k + 1] = z[k] - a[k] * g[k] / L
        if k < N:
            xr = w[k] * y[k + 1] + (1.0 - w[k]) * z[k + 1]
            if check:
                ref = x[k + 1]
                tol = CONSISTENCY_RTOL * max(1.0, np.linalg.norm(x0 - (oracle.x_star if oracle.x_star is not None else 0.0)), np.linalg.norm(ref))
                if np.linalg.norm(xr - ref) > tol:
                    raise AssertionError(
                        f"{schedule.method.value}: h-matrix and three-sequence iterates differ at k={k + 1}"
                        f" by {np.linalg.norm(xr - ref):.3e}")
    traj.y = y
    traj.z = z
    traj.fy = np.array([oracle.value(v) if np.all(np.isfinite(v)) else np.nan for v in y])
    return traj


def obl_f_tilde(trajectory: Trajectory, k: int) -> np.ndarray:
    """x~_k = (r y_k + z_k) / (r + 1) with r = sqrt(k(k+1)/2)."""
    if trajectory.y is None or trajectory.z is None:
        raise ValueError("trajectory has no y/z sequences")
    if k < 0:
        raise ValueError("k must be nonnegative")
    r = math.sqrt(k * (k + 1) / 2.0)
    return (r * trajectory.y[k] + trajectory.z[k]) / (r + 1.0)


def run_generator(method, oracle: SmoothOracle, x0, N: int, L: Optional[float] = None,
                  table: Optional[CoefficientTable] = None, last_step: bool = True) -> Trajectory:
    """Run a built-in method through its three-sequence recursion only.

    Same iterates as ``run_fsfo`` up to rounding; this form performs the
    same floating-point operations as the coordinate methods at n = 1.
    """
    method = Method(method)
    if method is Method.CUSTOM:
        raise ValueError("custom schedules have no three-sequence form")
    if N < MIN_HORIZON.get(method, 1):
        raise ValueError(f"{method.value} needs N >= {MIN_HORIZON.get(method, 1)}, got {N}")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != oracle.dim:
        raise ValueError(f"x0 has dimension {x0.shape[0]}, oracle expects {oracle.dim}")
    L = oracle.L if L is None else float(L)
    a, w = generator(method, N, table, last_step)
    n = oracle.dim
    x = np.zeros((N + 1, n))
    g = np.zeros((N + 1, n))
    fx = np.zeros(N + 1)
    y = np.full((N + 2, n), np.nan)
    z = np.full((N + 2, n), np.nan)
    x[0] = y[0] = z[0] = x0
    for k in range(N + 1):
        fx[k], g[k] = oracle.eval(x[k])
        y[k + 1] = x[k] - g[k] / L
        if not math.isnan(a[k]):
            z[k + 1] = z[k] - a[k] * g[k] / L
        if k < N:
            x[k + 1] = w[k] * y[k + 1] + (1.0 - w[k]) * z[k + 1]
    fy = np.array([oracle.value(v) if np.all(np.isfinite(v)) else np.nan for v in y])
    return Trajectory(method.value, N, x, fx, g, y=y, z=z, fy=fy, oracle_name=oracle.name, L=L,
                      extra={"last_step": last_step})
