"""Residuals of the smooth convex inequality families.

Every residual is LHS - RHS of the named inequality, so a genuinely
L-smooth convex function gives values >= 0 up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .oracles import SmoothOracle

RESIDUAL_RTOL = 1e-9


class Kind(str, Enum):
    COCOERCIVITY = "cocoercivity"
    GRADIENT_STEP = "gradient_step"
    CONVEXITY = "convexity"
    COORD_COCOERCIVITY = "coord_cocoercivity"
    COORD_GRADIENT_STEP = "coord_gradient_step"


@dataclass(frozen=True)
class InequalityResidual:
    kind: Kind
    value: float
    scale: float
    points: tuple

    @property
    def ok(self) -> bool:
        return self.value >= -RESIDUAL_RTOL * self.scale


def _scale(fx: float, fy: float, gx, gy, L: float) -> float:
    g2 = max(float(gx @ gx), float(gy @ gy))
    return max(1.0, abs(fx), abs(fy), g2 / L)


def residual(kind, oracle: SmoothOracle, x, y=None, i: Optional[int] = None,
             L_override: Optional[float] = None) -> InequalityResidual:
    """Evaluate one inequality on the given points.

    cocoercivity (x, y):   f(x) - f(y) - <g(y), x - y> - |g(x) - g(y)|^2 / 2L
    convexity (x, y):      f(x) - f(y) - <g(y), x - y>
    gradient_step at x:    f(x) - f(y) - |g(x)|^2 / 2L,  y = x - g(x)/L by default
    coord_cocoercivity (x, y, i):   as cocoercivity with (g_i(x) - g_i(y))^2 / 2L_i
    coord_gradient_step (x, i):     f(x) - f(y) - g_i(x)^2 / 2L_i,  y = x - g_i(x) e_i / L_i
    """
    kind = Kind(kind)
    x = np.asarray(x, dtype=float)
    coord = kind in (Kind.COORD_COCOERCIVITY, Kind.COORD_GRADIENT_STEP)
    if coord:
        if i is None:
            raise ValueError(f"{kind.value} needs a coordinate index")
        if L_override is not None:
            Li = float(L_override)
        elif oracle.coordinate_L is not None:
            Li = float(oracle.coordinate_L[i])
        else:
            raise ValueError(f"{kind.value} needs coordinate smoothness constants")
        mod = Li
    else:
        mod = float(L_override) if L_override is not None else oracle.L

    fx, gx = oracle.eval(x)
    if y is None:
        if kind is Kind.GRADIENT_STEP:
            y = x - gx / mod
        elif kind is Kind.COORD_GRADIENT_STEP:
            y = x.copy()
            y[i] -= gx[i] / mod
        else:
            raise ValueError(f"{kind.value} needs a second point")
    y = np.asarray(y, dtype=float)
    fy, gy = oracle.eval(y)

    if kind is Kind.COCOERCIVITY:
        d = gx - gy
        val = fx - fy - gy @ (x - y) - d @ d / (2 * mod)
    elif kind is Kind.CONVEXITY:
        val = fx - fy - gy @ (x - y)
    elif kind is Kind.GRADIENT_STEP:
        val = fx - fy - gx @ gx / (2 * mod)
    elif kind is Kind.COORD_COCOERCIVITY:
        val = fx - fy - gy @ (x - y) - (gx[i] - gy[i]) ** 2 / (2 * mod)
    else:
        val = fx - fy - gx[i] ** 2 / (2 * mod)
    return InequalityResidual(kind, float(val), _scale(fx, fy, gx, gy, mod), (x, y, i))


def coord_coco_chain(oracle: SmoothOracle, x, y, i: int) -> dict:
    """Numerical walk through the argument behind coordinate cocoercivity.

    With g(u) = f(u) - f(y) - <grad f(y), u - y> (convex, minimum 0 at y) and
    u = x - grad_i g(x) e_i / L_i, the chain reads
    g* - g(x) <= g(u) - g(x) <= -grad_i g(x)^2 / 2L_i, and g* = 0 gives the
    inequality. Returns each quantity so callers can assert the ordering.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    Li = float(oracle.coordinate_L[i])
    fy, gy = oracle.eval(y)

    def g(u):
        return oracle.value(u) - fy - gy @ (u - y)

    gix = oracle.gradient(x)[i] - gy[i]
    u = x.copy()
    u[i] -= gix / Li
    gx = g(x)
    return {
        "gstar_minus_gx": 0.0 - gx,
        "gu_minus_gx": g(u) - gx,
        "bound": -gix * gix / (2 * Li),
        "residual": gx - gix * gix / (2 * Li),
    }


@dataclass(frozen=True)
class InterpolationReport:
    ok: bool
    worst_value: float
    worst_pair: Optional[tuple[int, int]]


def check_interpolable(triplets: Sequence[tuple], L: float) -> InterpolationReport:
    """Smooth convex interpolation test over all ordered pairs.

    f_i - f_j - <g_j, x_i - x_j> >= |g_i - g_j|^2 / 2L for every i != j.
    """
    pts = [(np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(g, float)), float(f))
           for x, g, f in triplets]
    worst, pair = np.inf, None
    for a, (xa, ga, fa) in enumerate(pts):
        for b, (xb, gb, fb) in enumerate(pts):
            if a == b:
                continue
            d = ga - gb
            val = fa - fb - gb @ (xa - xb) - d @ d / (2 * L)
            scale = max(1.0, abs(fa), abs(fb), max(ga @ ga, gb @ gb) / L)
            if val / scale < worst:
                worst, pair = val / scale, (a, b)
    if pair is None:
        return InterpolationReport(True, 0.0, None)
    return InterpolationReport(bool(worst >= -RESIDUAL_RTOL), float(worst), pair)
