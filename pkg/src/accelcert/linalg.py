"""Small dense symmetric linear algebra for the certificate engine."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import jacobi_sweeps

PSD_TOL = 1e-8
JACOBI_RTOL = 1e-13
MAX_SWEEPS = 100


def as_symmetric(a) -> np.ndarray:
    """Return a float copy of ``a`` with exact symmetry (A + A^T)/2."""
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a nonempty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return 0.5 * (a + a.T)


def eigh_sym(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition by cyclic Jacobi rotations.

    Returns ascending eigenvalues ``w`` and orthonormal columns ``V`` with
    ``A = V diag(w) V^T``.
    """
    work = np.ascontiguousarray(as_symmetric(a))
    n = work.shape[0]
    v = np.eye(n)
    tol = JACOBI_RTOL * np.linalg.norm(work)
    jacobi_sweeps(work, v, tol, MAX_SWEEPS)
    w = np.diag(work).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def eigenvalues_sym(a) -> np.ndarray:
    return eigh_sym(a)[0]


@dataclass(frozen=True)
class PsdReport:
    ok: bool
    min_eig: float

    def __bool__(self) -> bool:
        return self.ok


def is_psd(a, tol: float = PSD_TOL) -> PsdReport:
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    lo = float(eigenvalues_sym(a)[0])
    return PsdReport(lo >= -tol, lo)


def solve_ls(a, b) -> tuple[np.ndarray, float]:
    """Minimum-norm least squares.

    Returns ``(x, ||A x - b||)``. Rank deficiency is not an error; it shows
    up as a large residual.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    m = a.shape[0]
    if b.shape[0] != m:
        raise ValueError("right-hand side length does not match rows")
    x = np.linalg.lstsq(a, b, rcond=None)[0]
    return x, float(np.linalg.norm(a @ x - b))
