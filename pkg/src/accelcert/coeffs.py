"""Scalar coefficient sequences theta, theta-tilde and phi.

theta_0 = 1,  theta_{k+1} = (1 + sqrt(4 theta_k^2 + 1)) / 2
theta~_k = (1 + sqrt(8 theta_{k-1}^2 + 1)) / 2          (k >= 1)
phi_0 = 0,    phi_{k+1} = phi_k + 1 + sqrt(1 + phi_k)    (so phi_1 = 2)

The phi update is the positive root of (2 phi_{k+1} - phi_k) = (phi_{k+1} - phi_k)^2.
"""

from __future__ import annotations

import math
import threading

import numpy as np

from ._backend import fill_phi, fill_theta

MAX_INDEX = 10**7


class CoefficientTable:
    """Memoized theta / phi arrays with lazy geometric growth.

    Extension happens under a lock and swaps in a new array, so readers
    never observe a half-filled cache.
    """

    def __init__(self, initial: int = 64):
        self._lock = threading.Lock()
        self._theta = np.empty(0)
        self._phi = np.empty(0)
        self._ensure(max(2, initial))

    @property
    def max_index(self) -> int:
        return self._theta.shape[0] - 1

    def _ensure(self, k: int) -> None:
        if k < self._theta.shape[0]:
            return
        with self._lock:
            old = self._theta.shape[0]
            if k < old:
                return
            size = min(max(k + 1, 2 * old, 64), MAX_INDEX + 2)
            theta = np.empty(size)
            phi = np.empty(size)
            if old == 0:
                theta[0], phi[0] = 1.0, 0.0
                start = 1
            else:
                theta[:old] = self._theta
                phi[:old] = self._phi
                start = old
            fill_theta(theta, start)
            fill_phi(phi, start)
            self._phi = phi
            self._theta = theta

    @staticmethod
    def _check(k: int) -> int:
        if isinstance(k, bool) or int(k) != k:
            raise TypeError(f"index must be an integer, got {k!r}")
        k = int(k)
        if k < 0:
            raise ValueError(f"index must be nonnegative, got {k}")
        if k > MAX_INDEX:
            raise ValueError(f"index {k} exceeds the cap {MAX_INDEX}")
        return k

    def theta(self, k: int) -> float:
        k = self._check(k)
        self._ensure(k)
        return float(self._theta[k])

    def theta_tilde(self, k: int) -> float:
        k = self._check(k)
        if k < 1:
            raise ValueError("theta_tilde is defined for k >= 1")
        t = self.theta(k - 1)
        return 0.5 * (1.0 + math.sqrt(8.0 * t * t + 1.0))

    def phi(self, k: int) -> float:
        k = self._check(k)
        self._ensure(k)
        return float(self._phi[k])

    def theta_array(self, n: int) -> np.ndarray:
        """theta_0 .. theta_{n-1} as a read-only copy."""
        self._ensure(n)
        return self._theta[:n].copy()

    def phi_array(self, n: int) -> np.ndarray:
        """phi_0 .. phi_{n-1} as a read-only copy."""
        self._ensure(n)
        return self._phi[:n].copy()


_DEFAULT = CoefficientTable()


def default_table() -> CoefficientTable:
    return _DEFAULT


def theta(k: int) -> float:
    return _DEFAULT.theta(k)


def theta_tilde(k: int) -> float:
    return _DEFAULT.theta_tilde(k)


def phi(k: int) -> float:
    return _DEFAULT.phi(k)
