"""Test functions with certified smoothness constants.

Each oracle exposes f, the full gradient, a per-coordinate gradient (read
off the full one), the global modulus L, optional coordinate moduli, and a
minimizer when one is known.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .linalg import eigh_sym

PSD_REJECT_TOL = 1e-12
SAMPLE_PAIRS = 1000


@dataclass(frozen=True)
class SmoothOracle:
    dim: int
    L: float
    f_star: float
    value: Callable[[np.ndarray], float] = field(repr=False)
    gradient: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    coordinate_L: Optional[np.ndarray] = None
    x_star: Optional[np.ndarray] = None
    f_star_is_estimate: bool = False
    name: str = "custom"

    def eval(self, x) -> tuple[float, np.ndarray]:
        x = np.asarray(x, dtype=float)
        return self.value(x), self.gradient(x)

    def coord_grad(self, x, i: int) -> float:
        return float(self.gradient(np.asarray(x, dtype=float))[i])

    @property
    def S(self) -> float:
        """Sum of sqrt(L_i)."""
        if self.coordinate_L is None:
            raise ValueError("oracle has no coordinate smoothness constants")
        return float(np.sum(np.sqrt(self.coordinate_L)))

    @property
    def probabilities(self) -> np.ndarray:
        """Coordinate sampling weights sqrt(L_i) / S."""
        r = np.sqrt(self.coordinate_L)
        return r / r.sum()


def _register(oracle: SmoothOracle, seed: int = 0) -> SmoothOracle:
    """Sample pairs and reject oracles whose registered constants are wrong."""
    rng = np.random.default_rng(seed)
    n = oracle.dim
    centre = oracle.x_star if oracle.x_star is not None else np.zeros(n)
    for _ in range(SAMPLE_PAIRS):
        x = centre + rng.normal(scale=2.0, size=n)
        y = centre + rng.normal(scale=2.0, size=n)
        fx, gx = oracle.eval(x)
        fy, gy = oracle.eval(y)
        dg = gx - gy
        scale = max(1.0, abs(fx), abs(fy), float(gy @ gy) / oracle.L)
        resid = fx - fy - gy @ (x - y) - dg @ dg / (2 * oracle.L)
        if resid < -1e-9 * scale:
            raise ValueError(f"{oracle.name}: cocoercivity fails at modulus L={oracle.L}")
        if oracle.coordinate_L is not None:
            i = int(rng.integers(n))
            c = fx - fy - gy @ (x - y) - dg[i] ** 2 / (2 * oracle.coordinate_L[i])
            if c < -1e-9 * scale:
                raise ValueError(f"{oracle.name}: coordinate smoothness fails for i={i}")
    if oracle.x_star is not None and not oracle.f_star_is_estimate:
        fs = oracle.value(oracle.x_star)
        if abs(fs - oracle.f_star) > 1e-12 * max(1.0, abs(oracle.f_star)):
            raise ValueError(f"{oracle.name}: f(x_star) != f_star")
    return oracle


def make_quadratic(A, b, name: str = "quadratic") -> SmoothOracle:
    """f(x) = 1/2 x^T A x - b^T x for PSD ``A``."""
    A = np.array(A, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    b = np.array(b, dtype=float).reshape(-1)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape[0] != n:
        raise ValueError("A must be n x n and b of length n")
    A = 0.5 * (A + A.T)
    w, V = eigh_sym(A)
    if w[0] < -PSD_REJECT_TOL * max(1.0, abs(w[-1])):
        raise ValueError(f"A is not PSD (min eigenvalue {w[0]:.3e})")
    L = float(w[-1])
    if L <= 0:
        raise ValueError("A must be nonzero")
    # minimum-norm minimizer via the spectral pseudo-inverse
    keep = w > 1e-12 * L
    coef = (V.T @ b)
    if np.any(np.abs(coef[~keep]) > 1e-10 * max(1.0, np.linalg.norm(b))):
        raise ValueError("b is not in the range of A; f is unbounded below")
    x_star = V[:, keep] @ (coef[keep] / w[keep])
    f_star = float(-0.5 * b @ x_star)

    def value(x):
        return float(0.5 * x @ (A @ x) - b @ x)

    def gradient(x):
        return A @ x - b

    oracle = SmoothOracle(
        dim=n, L=L, f_star=f_star, value=value, gradient=gradient,
        coordinate_L=np.diag(A).copy(), x_star=x_star, name=name,
    )
    if np.any(oracle.coordinate_L <= 0):
        oracle = SmoothOracle(
            dim=n, L=L, f_star=f_star, value=value, gradient=gradient,
            coordinate_L=None, x_star=x_star, name=name,
        )
    return _register(oracle)


def make_logsumexp(rows, scale: float = 1.0, name: str = "logsumexp",
                   gd_iters: int = 20000) -> SmoothOracle:
    """f(x) = scale * log sum_i exp(a_i^T x / scale).

    The optimal value is estimated by a long gradient-descent run and flagged
    as an estimate. When the rows are symmetric (every row has its negation)
    the minimizer is 0 and is recorded exactly.
    """
    A = np.atleast_2d(np.asarray(rows, dtype=float))
    if A.size == 0 or A.shape[0] == 0:
        raise ValueError("need at least one row")
    if scale <= 0:
        raise ValueError("scale must be positive")
    n = A.shape[1]
    L = float(np.linalg.eigvalsh(A.T @ A)[-1]) / scale
    L = max(L, 1e-300)

    def value(x):
        z = A @ x / scale
        m = z.max()
        return float(scale * (m + np.log(np.exp(z - m).sum())))

    def gradient(x):
        z = A @ x / scale
        p = np.exp(z - z.max())
        return A.T @ (p / p.sum())

    symmetric = all(np.any(np.all(np.isclose(A, -row), axis=1)) for row in A)
    if symmetric:
        x_star = np.zeros(n)
        f_star = value(x_star)
        estimate = False
    else:
        x = np.zeros(n)
        for _ in range(gd_iters):
            x = x - gradient(x) / L
        x_star = None
        f_star = value(x)
        estimate = True
    oracle = SmoothOracle(
        dim=n, L=L, f_star=f_star, value=value, gradient=gradient,
        coordinate_L=None, x_star=x_star, f_star_is_estimate=estimate, name=name,
    )
    return _register(oracle)


def make_huber(delta: float, center, name: str = "huber") -> SmoothOracle:
    """Separable Huber loss about ``center`` with curvature 1 on |t| <= delta."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    c = np.atleast_1d(np.asarray(center, dtype=float))
    n = c.shape[0]

    def value(x):
        t = np.abs(x - c)
        return float(np.where(t <= delta, 0.5 * t * t, delta * (t - 0.5 * delta)).sum())

    def gradient(x):
        return np.clip(x - c, -delta, delta)

    oracle = SmoothOracle(
        dim=n, L=1.0, f_star=0.0, value=value, gradient=gradient,
        coordinate_L=np.ones(n), x_star=c.copy(), name=name,
    )
    return _register(oracle)


def random_quadratic(rng: np.random.Generator, dim: int, cond: float = 100.0,
                     name: str = "random-quadratic") -> SmoothOracle:
    """PSD quadratic with spectrum in [1/cond, 1] rotated by a random orthogonal matrix."""
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    spectrum = np.exp(rng.uniform(np.log(1.0 / cond), 0.0, size=dim))
    spectrum[0] = 1.0
    A = (q * spectrum) @ q.T
    b = A @ rng.normal(size=dim)
    return make_quadratic(A, b, name=name)


def _quad_diag_10():
    return make_quadratic(np.diag([1.0, 10.0]), np.zeros(2), name="quad-diag-10")


def _quad_1d():
    return make_quadratic(np.array([[4.0]]), np.zeros(1), name="quad-1d")


def _huber_1d():
    return make_huber(1.0, [0.0], name="huber-1d")


def _lse_2():
    return make_logsumexp([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], 1.0, name="lse-2")


PROBLEMS: dict[str, tuple[Callable[[], SmoothOracle], np.ndarray, str]] = {
    "quad-diag-10": (_quad_diag_10, np.array([1.0, 1.0]), "1/2 x^T diag(1,10) x"),
    "quad-1d": (_quad_1d, np.array([1.0]), "2 x^2 (L = 4)"),
    "huber-1d": (_huber_1d, np.array([5.0]), "Huber, delta 1, centre 0"),
    "lse-2": (_lse_2, np.array([1.0, -2.0]), "log-sum-exp of +-e1, +-e2"),
}


def get_problem(problem_id: str) -> tuple[SmoothOracle, np.ndarray]:
    """Oracle and default starting point for a registry id."""
    try:
        factory, x0, _ = PROBLEMS[problem_id]
    except KeyError:
        raise KeyError(f"unknown problem {problem_id!r}; known: {sorted(PROBLEMS)}") from None
    return factory(), x0.copy()
