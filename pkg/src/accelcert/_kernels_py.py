"""Pure-Python versions of the hot loops.

These mirror ``_kernels.pyx`` one for one and are used when the compiled
module is unavailable.
"""

import math

import numpy as np


def fill_theta(out: np.ndarray, start: int) -> None:
    """Extend ``out[start:]`` with theta_{k+1} = (1 + sqrt(4 theta_k^2 + 1)) / 2."""
    prev = out[start - 1]
    for k in range(start, out.shape[0]):
        prev = 0.5 * (1.0 + math.sqrt(4.0 * prev * prev + 1.0))
        out[k] = prev


def fill_phi(out: np.ndarray, start: int) -> None:
    """Extend ``out[start:]`` with phi_{k+1} = phi_k + 1 + sqrt(1 + phi_k)."""
    prev = out[start - 1]
    for k in range(start, out.shape[0]):
        prev = prev + 1.0 + math.sqrt(1.0 + prev)
        out[k] = prev


def jacobi_sweeps(a: np.ndarray, v: np.ndarray, tol: float, max_sweeps: int) -> int:
    """Cyclic Jacobi rotations applied in place.

    ``a`` is driven towards diagonal form and ``v`` accumulates the rotations.
    Stops once the off-diagonal Frobenius norm drops to ``tol``. Returns the
    number of sweeps performed.
    """
    n = a.shape[0]
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        if math.sqrt(2.0 * off) <= tol:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                theta = (aqq - app) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # rotate columns p, q then rows p, q
                col_p = a[:, p].copy()
                col_q = a[:, q]
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :]
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return max_sweeps
