"""Accelerated first-order methods with Lyapunov and dual-certificate checks."""

from . import adaptive, coeffs, fsfo, inequalities, linalg, lyapunov, oracles, pep
from ._backend import COMPILED

__version__ = "0.1.0"

__all__ = ["COMPILED", "adaptive", "coeffs", "fsfo", "inequalities", "linalg", "lyapunov",
           "oracles", "pep", "__version__"]
