"""Select the compiled kernels when built, else the pure-Python ones.

Set ``ACCELCERT_PURE=1`` to force the fallback.
"""

import os

if os.environ.get("ACCELCERT_PURE") == "1":
    from . import _kernels_py as kernels
    COMPILED = False
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]
        COMPILED = True
    except ImportError:
        from . import _kernels_py as kernels
        COMPILED = False

fill_theta = kernels.fill_theta
fill_phi = kernels.fill_phi
jacobi_sweeps = kernels.jacobi_sweeps

__all__ = ["COMPILED", "fill_theta", "fill_phi", "jacobi_sweeps", "kernels"]
