"""Closed-form dual certificates for the performance estimation problem.

Basis of the (N+2)-dimensional Gram space: index 0 is x_0 (with x_star = 0),
index i+1 is g_i. Iterates expand as x_k = e_0 - (1/L) sum_j s[k, j] e_{j+1}
with s the cumulative h-matrix.

The reduced form used throughout is the scaled matrix A = L * S with
tau' = 2 L tau and gamma = -L beta, so that

    A = [[tau'/2, gamma_hat^T/2, gamma_N/2],
         [gamma_hat/2, Q, q],
         [gamma_N/2, q^T, d]]

in the ordering (x_0, g_0..g_{N-1}, g_N).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .coeffs import CoefficientTable, default_table
from .fsfo import FsfoSchedule, Method, build_schedule
from .linalg import as_symmetric, is_psd, solve_ls

LINEAR_TOL = 1e-12
ZERO_BLOCK_RTOL = 1e-9
PSD_RTOL = 1e-9
KKT_TOL = 1e-8
H_MATCH_TOL = 1e-9
NONNEG_TOL = 1e-14


class CertMethod(str, Enum):
    ORC_F_FLAT = "orc-f-flat"
    OBL_F_FLAT = "obl-f-flat"
    FGM = "fgm"
    OBL_G_FLAT = "obl-g-flat"


SCHEDULE_METHOD = {
    CertMethod.ORC_F_FLAT: Method.ORC_F_FLAT,
    CertMethod.OBL_F_FLAT: Method.OBL_F_FLAT,
    CertMethod.FGM: Method.FGM,
    CertMethod.OBL_G_FLAT: Method.OBL_G_FLAT,
}

# Schedule options matching each certificate's optimal algorithm.
SCHEDULE_OPTIONS = {
    CertMethod.OBL_F_FLAT: {"last_step": True},
}


@dataclass
class DualCertificate:
    method: CertMethod
    N: int
    L: float
    lam: np.ndarray            # lambda_1..lambda_N stored at indices 1..N (index 0 unused)
    beta: np.ndarray           # beta_0..beta_N (OBL-G-flat: beta_0..beta_{N-1})
    tau: float
    alpha: Optional[np.ndarray] = None
    r: Optional[np.ndarray] = None
    c: Optional[np.ndarray] = None
    K: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)

    @property
    def gamma(self) -> np.ndarray:
        return -self.L * self.beta

    @property
    def corner(self) -> float:
        """Pivot d of the scaled matrix (coefficient of g_N g_N^T)."""
        lam_n = self.lam[self.N]
        return {CertMethod.ORC_F_FLAT: (2.0 - lam_n) / 2.0,
                CertMethod.OBL_F_FLAT: lam_n / 2.0,
                CertMethod.FGM: 0.5}[self.method]

    def linear_residual(self) -> float:
        return linear_residual(self)

    def min_multiplier(self) -> float:
        parts = [self.lam[1:], self.beta, [self.tau]]
        if self.alpha is not None:
            parts.append(self.alpha)
        if "c_scalar" in self.extra:
            parts.append([self.extra["c_scalar"]])
        return float(min(np.min(np.asarray(p, dtype=float)) for p in parts))

    def to_dict(self) -> dict:
        out = {
            "method": self.method.value,
            "N": self.N,
            "L": self.L,
            "lambda": self.lam[1:].tolist(),
            "beta": self.beta.tolist(),
            "gamma": self.gamma.tolist(),
            "tau": self.tau,
            "alpha": None if self.alpha is None else self.alpha.tolist(),
            "r": None if self.r is None else self.r.tolist(),
            "c": None if self.c is None else self.c.tolist(),
            "K": None if self.K is None else self.K.tolist(),
        }
        out.update({k: v for k, v in self.extra.items() if k not in out})
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _check_n(method: CertMethod, N) -> int:
    if isinstance(N, bool) or int(N) != N:
        raise ValueError(f"horizon must be an integer, got {N!r}")
    N = int(N)
    lo = 3 if method is CertMethod.OBL_G_FLAT else 1
    if N < lo:
        raise ValueError(f"{method.value} certificate needs N >= {lo}, got {N}")
    return N


def rate_constant(method, N: int, L: float, table: Optional[CoefficientTable] = None) -> float:
    """Closed-form tau for each certificate family."""
    method = CertMethod(method)
    N = _check_n(method, N)
    t = table or default_table()
    if method is CertMethod.ORC_F_FLAT:
        return L / (2.0 * t.phi(N + 1))
    if method is CertMethod.OBL_F_FLAT:
        return L / (N * (N + 1) + math.sqrt(2.0 * N * (N + 1)))
    if method is CertMethod.FGM:
        return L / (2.0 * t.theta(N) ** 2)
    rt = math.sqrt(2.0 * N * (N + 1))
    return 4.0 * L * (N * N + N - rt) / (N * N * (N + 1) ** 2 - 2.0 * rt)


def r_from_multipliers(method: CertMethod, lam: np.ndarray, beta: np.ndarray, N: int) -> np.ndarray:
    """r-variables that zero the reduced block, as functions of (lambda, beta).

    r_{N,t} = D beta_t / beta_N (plus lambda_N at t = N-1),
    r_{k,t} = rbar_k rbar_t / D for t <= k-2 and
    r_{k,k-1} = lambda_k + rbar_k rbar_{k-1} / D, where D = 2 d.
    """
    lam_n = lam[N]
    D = {CertMethod.ORC_F_FLAT: 2.0 - lam_n,
         CertMethod.OBL_F_FLAT: lam_n,
         CertMethod.FGM: 1.0}[method]
    rbar = D * beta[:N] / beta[N]
    r = np.zeros((N + 1, N + 1))
    r[N, :N] = rbar
    r[N, N - 1] += lam_n
    for k in range(1, N):
        r[k, :k] = rbar[k] * rbar[:k] / D
        r[k, k - 1] += lam[k]
    return r


def build_certificate(method, N: int, L: float = 1.0,
                      table: Optional[CoefficientTable] = None) -> DualCertificate:
    method = CertMethod(method)
    N = _check_n(method, N)
    if not (L > 0 and math.isfinite(L)):
        raise ValueError("L must be positive and finite")
    t = table or default_table()
    lam = np.zeros(N + 1)
    if method is CertMethod.OBL_G_FLAT:
        return _build_obl_g_flat(N, L)
    if method is CertMethod.ORC_F_FLAT:
        phi = t.phi_array(N + 2)
        lam[1:] = phi[1:N + 1] / phi[N + 1]
    elif method is CertMethod.OBL_F_FLAT:
        s = N * (N + 1) / 2.0
        T = 1.0 / (s + math.sqrt(s))
        k = np.arange(1, N + 1)
        lam[1:] = k * (k + 1) * T / 2.0
    else:
        th = t.theta_array(N + 1)
        lam[1:] = th[:N] ** 2 / th[N] ** 2
    beta = np.empty(N + 1)
    beta[0] = lam[1]
    beta[1:N] = lam[2:] - lam[1:N]
    beta[N] = 1.0 - lam[N]
    alpha = None
    if method in (CertMethod.ORC_F_FLAT, CertMethod.FGM):
        alpha = np.empty(N + 1)
        alpha[:N] = lam[1:]
        alpha[N] = 1.0
    tau = rate_constant(method, N, L, t)
    r = r_from_multipliers(method, lam, beta, N)
    return DualCertificate(method, N, L, lam, beta, tau, alpha, r)


def _build_obl_g_flat(N: int, L: float) -> DualCertificate:
    tau = rate_constant(CertMethod.OBL_G_FLAT, N, L)
    scale = 4.0 * L - 2.0 * tau          # lambda/2 + tau = 2L
    lam = np.zeros(N + 1)
    for k in range(1, N + 1):
        lam[N - k + 1] = scale / (k * (k + 1))
    rt = math.sqrt(N * (N + 1) / 2.0)
    b0_hat = 2.0 * (rt - 1.0) / ((N - 1) * N * (N + 1) * (N + 2))
    beta = np.empty(N)
    beta[0] = b0_hat * scale
    for k in range(1, N):
        beta[k] = 2.0 * scale / ((N - k) * (N - k + 1) * (N - k + 2))
    extra = {"c_scalar": tau, "lambda_scale": scale, "beta0_hat": b0_hat,
             "normalization": "lambda/2 + tau = 2L"}
    return DualCertificate(CertMethod.OBL_G_FLAT, N, L, lam, beta, tau, extra=extra)


def linear_residual(cert: DualCertificate) -> float:
    lam, beta, N = cert.lam, cert.beta, cert.N
    if cert.method is CertMethod.OBL_G_FLAT:
        c = cert.extra["c_scalar"]
        res = [cert.tau - lam[1] + beta[0]]
        res += [lam[k] - lam[k + 1] + beta[k] for k in range(1, N)]
        res.append(-c + lam[N] - float(np.sum(beta)))
        return float(np.max(np.abs(res)))
    res = [beta[0] - lam[1]]
    res += [beta[k] - (lam[k + 1] - lam[k]) for k in range(1, N)]
    res.append(beta[N] - (1.0 - lam[N]))
    if cert.alpha is not None:
        res += [cert.alpha[k] - lam[k + 1] for k in range(N)]
        res.append(cert.alpha[N] - 1.0)
        res.append(cert.alpha[0] - beta[0])
    return float(np.max(np.abs(res)))


def certificate_schedule(cert: DualCertificate, table=None) -> FsfoSchedule:
    return build_schedule(SCHEDULE_METHOD[cert.method], cert.N, table,
                          **SCHEDULE_OPTIONS.get(cert.method, {}))


def _sym(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return 0.5 * (np.outer(u, v) + np.outer(v, u))


def _embedding(schedule: FsfoSchedule, L: float):
    N = schedule.N
    n = N + 2
    s = schedule.s()
    eye = np.eye(n)
    X = np.zeros((N + 1, n))
    X[:, 0] = 1.0
    X[:, 1:] = -s / L
    G = eye[1:]
    return X, G


def assemble_S(cert: DualCertificate, schedule: FsfoSchedule) -> np.ndarray:
    """S matrix of the dual PEP, from the Lagrangian definitions."""
    if schedule.N != cert.N or schedule.h.shape != (cert.N + 1, cert.N + 1):
        raise ValueError(f"schedule horizon {schedule.N} does not match certificate N={cert.N}")
    N, L, lam, beta = cert.N, cert.L, cert.lam, cert.beta
    X, G = _embedding(schedule, L)
    S = np.zeros((N + 2, N + 2))
    m = cert.method
    if m is CertMethod.OBL_G_FLAT:
        c = cert.extra["c_scalar"]
        S += (-1.0 + c / (2.0 * L)) * np.outer(G[N], G[N])
        for k in range(1, N + 1):
            dg = G[k - 1] - G[k]
            S += lam[k] * (_sym(G[k], X[k - 1] - X[k]) + np.outer(dg, dg) / (2.0 * L))
        for k in range(N):
            S += beta[k] * _sym(G[k], X[N] - X[k])
        return S
    S[0, 0] += cert.tau
    for k in range(N + 1):
        S -= beta[k] * _sym(G[k], X[k])
    if m is CertMethod.OBL_F_FLAT:
        for k in range(1, N + 1):
            dg = G[k - 1] - G[k]
            S += lam[k] * (_sym(G[k], X[k - 1] - X[k]) + np.outer(dg, dg) / (2.0 * L))
        return S
    diag = cert.alpha + beta if m is CertMethod.ORC_F_FLAT else cert.alpha
    for k in range(N + 1):
        S += diag[k] / (2.0 * L) * np.outer(G[k], G[k])
    for k in range(1, N + 1):
        S += lam[k] * (_sym(G[k], X[k - 1] - X[k]) - _sym(G[k - 1], G[k]) / L)
    return S


def schur_reduce(S, pivot_position: int, pivot_value: Optional[float] = None) -> np.ndarray:
    """Complement of the scalar pivot at ``pivot_position``."""
    S = as_symmetric(S)
    n = S.shape[0]
    if not 0 <= pivot_position < n:
        raise ValueError(f"pivot position {pivot_position} outside 0..{n - 1}")
    p = S[pivot_position, pivot_position] if pivot_value is None else float(pivot_value)
    if not p > 0:
        raise ValueError(f"pivot must be positive, got {p}")
    keep = [i for i in range(n) if i != pivot_position]
    b = S[keep, pivot_position]
    return S[np.ix_(keep, keep)] - np.outer(b, b) / p


def r_from_h(cert: DualCertificate, h: np.ndarray) -> np.ndarray:
    """r_{k,t} = lambda_k h_{k,t} + beta_k sum_{j=t+1}^{k} h_{j,t}."""
    N = cert.N
    r = np.zeros((N + 1, N + 1))
    for k in range(1, N + 1):
        for t in range(k):
            r[k, t] = cert.lam[k] * h[k, t] + cert.beta[k] * float(np.sum(h[t + 1:k + 1, t]))
    return r


def printed_blocks(cert: DualCertificate, r: Optional[np.ndarray] = None) -> dict:
    """Q, q, corner, tau', gamma of the scaled matrix, from the closed-form expressions in r."""
    if cert.method is CertMethod.OBL_G_FLAT:
        raise ValueError("no reduced block for OBL-G-flat")
    r = cert.r if r is None else r
    N, lam, m = cert.N, cert.lam, cert.method
    Q = np.zeros((N, N))
    if m is CertMethod.ORC_F_FLAT:
        Q[0, 0] += lam[1] / 2.0
        for k in range(1, N):
            Q[k, k] += (lam[k + 1] - 2.0 * lam[k]) / 2.0
    elif m is CertMethod.FGM:
        for k in range(1, N):
            Q[k, k] -= lam[k] / 2.0
    eye = np.eye(N)
    for k in range(1, N):
        dg = eye[k - 1] - eye[k]
        Q += lam[k] / 2.0 * np.outer(dg, dg)
    Q[N - 1, N - 1] += lam[N] / 2.0
    for k in range(1, N):
        for t in range(k):
            Q[k, t] += r[k, t] / 2.0
            Q[t, k] += r[k, t] / 2.0
    q = r[N, :N] / 2.0
    q[N - 1] -= lam[N] / 2.0
    return {"Q": Q, "q": q, "d": cert.corner, "tau_prime": 2.0 * cert.L * cert.tau,
            "gamma": cert.gamma}


def printed_reduced_block(cert: DualCertificate, schedule: Optional[FsfoSchedule] = None) -> np.ndarray:
    """Schur complement of the scaled matrix in ordering (x_0, g_0..g_{N-1}).

    Uses r from ``schedule`` when given, else the certificate's own r.
    """
    r = None if schedule is None else r_from_h(cert, schedule.h)
    b = printed_blocks(cert, r)
    Q, q, d, tp, g = b["Q"], b["q"], b["d"], b["tau_prime"], b["gamma"]
    N = cert.N
    out = np.empty((N + 1, N + 1))
    out[0, 0] = 0.5 * (tp - g[N] ** 2 / (2.0 * d))
    v = 0.5 * (g[:N] - q * g[N] / d)
    out[0, 1:] = v
    out[1:, 0] = v
    out[1:, 1:] = Q - np.outer(q, q) / d
    return out


def reduced_block(cert: DualCertificate, schedule: FsfoSchedule) -> np.ndarray:
    """Schur complement of L*S at the g_N pivot, ordering (x_0, g_0..g_{N-1})."""
    A = cert.L * assemble_S(cert, schedule)
    return schur_reduce(A, cert.N + 1, cert.corner)


class SingularRowError(ValueError):
    pass


def recover_h(cert: DualCertificate) -> FsfoSchedule:
    """Invert the r-variables (or solve S = 0 for OBL-G-flat) back to an h-matrix."""
    if cert.method is CertMethod.OBL_G_FLAT:
        return _recover_h_obl_g(cert)
    if cert.r is None:
        raise ValueError("certificate carries no r-variables")
    N, lam, beta, r = cert.N, cert.lam, cert.beta, cert.r
    h = np.zeros((N + 1, N + 1))
    for t in range(N):
        acc = 0.0                      # sum_{j=t+1}^{k-1} h_{j,t}
        for k in range(t + 1, N + 1):
            piv = lam[k] + beta[k]
            if piv == 0.0 or not math.isfinite(piv):
                raise SingularRowError(f"row {k} has zero pivot lambda_k + beta_k")
            h[k, t] = (r[k, t] - beta[k] * acc) / piv
            acc += h[k, t]
    return FsfoSchedule(N, h, SCHEDULE_METHOD[cert.method], {"recovered": True})


def _recover_h_obl_g(cert: DualCertificate) -> FsfoSchedule:
    N = cert.N
    idx = [(i, j) for i in range(1, N + 1) for j in range(i)]
    method = SCHEDULE_METHOD[cert.method]

    def S_of(h):
        return assemble_S(cert, FsfoSchedule(N, h, method))

    base = S_of(np.zeros((N + 1, N + 1)))
    cols = []
    for (i, j) in idx:
        e = np.zeros((N + 1, N + 1))
        e[i, j] = 1.0
        cols.append((S_of(e) - base).ravel())
    A = np.stack(cols, axis=1)
    x, res = solve_ls(A, -base.ravel())
    h = np.zeros((N + 1, N + 1))
    for (i, j), v in zip(idx, x):
        h[i, j] = v
    return FsfoSchedule(N, h, method, {"recovered": True, "ls_residual": res})


@dataclass
class KKTReport:
    ok: bool
    K: np.ndarray
    c: np.ndarray
    stationarity_residual: float
    slackness_residual: float
    trace_SK: float
    K_min_eig: float
    failures: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "c": self.c.tolist(), "K": self.K.tolist(),
                "stationarity_residual": self.stationarity_residual,
                "slackness_residual": self.slackness_residual,
                "trace_SK": self.trace_SK, "K_min_eig": self.K_min_eig,
                "failures": list(self.failures), **self.extra}


def _k_matrix(kd: np.ndarray, c: np.ndarray, L: float) -> np.ndarray:
    n = kd.size + 1
    K = np.zeros((n, n))
    K[0, 0] = 1.0
    K[0, 1:] = c / L
    K[1:, 0] = c / L
    K[1:, 1:] = np.diag(kd)
    return K


def _stationarity(method: CertMethod, kd: np.ndarray, c: np.ndarray) -> np.ndarray:
    N = kd.size - 1
    out = np.empty(N)
    for k in range(1, N + 1):
        if method is CertMethod.ORC_F_FLAT:
            out[k - 1] = -(kd[k - 1] - 0.5 * kd[k]) - c[k] + c[k - 1]
        elif method is CertMethod.OBL_F_FLAT:
            out[k - 1] = -0.5 * (kd[k - 1] + kd[k]) + c[k - 1] - c[k]
        else:
            out[k - 1] = -0.5 * kd[k - 1] - c[k] + c[k - 1]
    return out


def fgm_kkt_closed_form(N: int, L: float, table=None) -> tuple[np.ndarray, np.ndarray]:
    """c from c_{i+1} = c_i (1 - 1/(2 theta_i)) with sum theta_i c_i = L^2; K_ii = c_i / theta_i."""
    th = (table or default_table()).theta_array(N + 1)
    c = np.empty(N + 1)
    c[0] = 1.0
    for i in range(N):
        c[i + 1] = c[i] * (1.0 - 1.0 / (2.0 * th[i]))
    c *= L ** 2 / float(np.dot(th, c))
    return c, c / th


def verify_kkt(cert: DualCertificate, schedule: Optional[FsfoSchedule] = None,
               tol: float = KKT_TOL) -> KKTReport:
    """Solve for the KKT multiplier matrix and check PSD, slackness and stationarity."""
    if cert.method is CertMethod.OBL_G_FLAT:
        raise ValueError("KKT verification is defined for ORC-F-flat, OBL-F-flat and FGM only")
    N, L = cert.N, cert.L
    schedule = schedule or recover_h(cert)
    A = L * assemble_S(cert, schedule)
    nvar = 2 * (N + 1)

    def residuals(v: np.ndarray) -> np.ndarray:
        kd, c = v[:N + 1], v[N + 1:]
        return np.concatenate([_stationarity(cert.method, kd, c),
                               (A @ _k_matrix(kd, c, L)).ravel()])

    const = residuals(np.zeros(nvar))
    J = np.stack([residuals(e) - const for e in np.eye(nvar)], axis=1)
    sol, _ = solve_ls(J, -const)
    extra = {}
    if cert.method is CertMethod.FGM:
        c_cf, kd_cf = fgm_kkt_closed_form(N, L)
        extra["closed_form_gap"] = float(np.max(np.abs(np.concatenate([kd_cf, c_cf]) - sol)))
        sol = np.concatenate([kd_cf, c_cf])
    kd, c = sol[:N + 1], sol[N + 1:]
    K = _k_matrix(kd, c, L)
    stat = float(np.max(np.abs(_stationarity(cert.method, kd, c))))
    slack = float(np.max(np.abs(A @ K)))
    trace = float(np.trace(A @ K))
    psd = is_psd(K, tol)
    if cert.method is CertMethod.ORC_F_FLAT:
        extra["normalization"] = float(np.sum(c ** 2 / (L ** 2 * kd)))
    failures = []
    if not psd.ok:
        failures.append("K not PSD")
    if abs(trace) > tol * max(1.0, np.linalg.norm(A) * np.linalg.norm(K)):
        failures.append("complementary slackness trace")
    if slack > tol * max(1.0, np.linalg.norm(A) * np.linalg.norm(K)):
        failures.append("A K != 0")
    if stat > tol * max(1.0, float(np.max(np.abs(sol)))):
        failures.append("stationarity")
    cert.c, cert.K = c, K
    return KKTReport(not failures, K, c, stat, slack, trace, psd.min_eig, failures, extra)


@dataclass
class CertificateReport:
    method: str
    N: int
    L: float
    tau: float
    tau_closed_form: float
    linear_residual: float
    min_multiplier: float
    zero_block: float
    min_eig: float
    h_match: float
    kkt: Optional[dict]
    ok: bool
    failures: list

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def certify(method, N: int, L: float = 1.0, table=None, kkt: bool = True) -> CertificateReport:
    """Full check of one closed-form certificate."""
    cert = build_certificate(method, N, L, table)
    sched = certificate_schedule(cert, table)
    S = assemble_S(cert, sched)
    failures = []
    lin = linear_residual(cert)
    if lin > LINEAR_TOL:
        failures.append("linear constraints")
    mm = cert.min_multiplier()
    if mm < -NONNEG_TOL:
        failures.append("negative multiplier")
    if cert.method is CertMethod.OBL_G_FLAT:
        zero = float(np.max(np.abs(S)))
    else:
        zero = float(np.max(np.abs(reduced_block(cert, sched))))
    if zero > ZERO_BLOCK_RTOL * L:
        failures.append("zero block")
    lo = float(is_psd(S).min_eig)
    if lo < -PSD_RTOL * L:
        failures.append("S not PSD")
    tau_cf = rate_constant(cert.method, N, L, table)
    if abs(cert.tau - tau_cf) > 1e-12 * max(1.0, abs(tau_cf)):
        failures.append("tau")
    hm = float(np.max(np.abs(recover_h(cert).h - sched.h)))
    if hm > H_MATCH_TOL:
        failures.append("h mismatch")
    kk = None
    if kkt and cert.method is not CertMethod.OBL_G_FLAT:
        rep = verify_kkt(cert, sched)
        kk = rep.to_dict()
        if not rep.ok:
            failures.append("kkt: " + ", ".join(rep.failures))
    return CertificateReport(cert.method.value, cert.N, L, cert.tau, tau_cf, lin, mm, zero, lo,
                             hm, kk, not failures, failures)
