"""Closed-form ground truth: the classical singly periodic Scherk surfaces in R^3.

The surface S_eps is the zero set of

    F(x1, x2, z) = cos^2(eps) cosh(x1 / cos eps) - sin^2(eps) cosh(z / sin eps) - cos x2

for eps in (0, pi/2).  All derivatives are coded by hand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import GeometryError, ValidationError


@dataclass(frozen=True)
class ImplicitFunction:
    """A scalar function on R^3 with its gradient and Hessian (points along the last axis)."""

    F: Callable
    grad: Callable
    hess: Callable


class ScherkSurface(ImplicitFunction):
    """The function F_eps with closed-form first and second derivatives."""

    def __init__(self, eps: float):
        if not 0 < eps < math.pi / 2:
            raise ValidationError("eps must lie in (0, pi/2)")
        c, s = math.cos(eps), math.sin(eps)
        self.eps, self.c, self.s = float(eps), c, s

        def F(p):
            p = np.asarray(p, dtype=float)
            return (c * c * np.cosh(p[..., 0] / c) - s * s * np.cosh(p[..., 2] / s)
                    - np.cos(p[..., 1]))

        def grad(p):
            p = np.asarray(p, dtype=float)
            return np.stack([c * np.sinh(p[..., 0] / c), np.sin(p[..., 1]),
                             -s * np.sinh(p[..., 2] / s)], axis=-1)

        def hess(p):
            p = np.asarray(p, dtype=float)
            H = np.zeros(p.shape[:-1] + (3, 3))
            H[..., 0, 0] = np.cosh(p[..., 0] / c)
            H[..., 1, 1] = np.cos(p[..., 1])
            H[..., 2, 2] = -np.cosh(p[..., 2] / s)
            return H

        object.__setattr__(self, "F", F)
        object.__setattr__(self, "grad", grad)
        object.__setattr__(self, "hess", hess)

    def acosh_argument(self, x1, x2):
        """cosh(z / sin eps) on the zero set, as a function of (x1, x2)."""
        c, s = self.c, self.s
        return (c * c * np.cosh(np.asarray(x1, dtype=float) / c) - np.cos(x2)) / (s * s)

    def solve_z(self, x1, x2):
        """Nonnegative z with F(x1, x2, z) = 0; NaN where no real solution exists."""
        arg = np.asarray(self.acosh_argument(x1, x2))
        out = np.full(arg.shape, np.nan)
        ok = arg >= 1.0
        out[ok] = self.s * np.arccosh(arg[ok])
        return out if out.ndim else (None if np.isnan(out) else float(out))

    def solve_x1(self, x2, z):
        """Nonnegative x1 with F(x1, x2, z) = 0; NaN where no real solution exists."""
        c, s = self.c, self.s
        arg = np.asarray((np.cos(x2) + s * s * np.cosh(np.asarray(z, dtype=float) / s)) / (c * c))
        out = np.full(arg.shape, np.nan)
        ok = arg >= 1.0
        out[ok] = c * np.arccosh(arg[ok])
        return out

    def sample(self, count: int, x1_max: float = 3.0, seed: int = 0) -> np.ndarray:
        """``count`` zero-set points with both signs of z, drawn by rejection."""
        rng = np.random.default_rng(seed)
        pts = []
        have = 0
        while have < count:
            x1 = rng.uniform(-x1_max, x1_max, 2 * count)
            x2 = rng.uniform(-math.pi, math.pi, 2 * count)
            z = self.solve_z(x1, x2)
            ok = np.isfinite(z)
            sign = rng.choice([-1.0, 1.0], ok.sum())
            pts.append(np.column_stack([x1[ok], x2[ok], sign * z[ok]]))
            have += ok.sum()
        return np.concatenate(pts)[:count]

    def quadrant_patch(self, n_x2: int = 65, n_tau: int = 40, x1_max: float = 6.0):
        """Structured samples of the part of S_eps with x1 >= 0, z >= 0 over one period.

        With q = cos^2 eps (cosh(x1/cos eps) - 1) and r = sin^2 eps (cosh(z/sin eps) - 1)
        the surface is q - r = cos x2 - cos 2 eps.  The patch is parametrized by
        x2 and tau = r - max(0, cos 2 eps - cos x2) >= 0, geometrically spaced.
        """
        c, s = self.c, self.s
        x2 = np.linspace(-math.pi, math.pi, n_x2)
        if 2 * self.eps < math.pi:
            # the saddle points (0, +-2 eps, 0) must be nodes, or reflections leave holes
            x2 = np.union1d(x2, [-2 * self.eps, 2 * self.eps])
            x2 = x2[np.concatenate([[True], np.diff(x2) > 1e-9])]
        D = np.cos(x2) - math.cos(2 * self.eps)
        q_max = c * c * (math.cosh(x1_max / c) - 1.0)
        t = np.concatenate([[0.0], np.geomspace(1e-3, 1.0, n_tau - 1)])
        lam0 = np.maximum(0.0, -D)
        tau = t[None, :] * (q_max - np.maximum(D, 0.0))[:, None]
        r = lam0[:, None] + tau
        q = r + D[:, None]
        x1 = c * np.arccosh(1.0 + np.clip(q, 0, None) / (c * c))
        z = s * np.arccosh(1.0 + np.clip(r, 0, None) / (s * s))
        return np.stack([x1, np.broadcast_to(x2[:, None], x1.shape), z], axis=-1)


def plane() -> ImplicitFunction:
    """F = z."""
    return ImplicitFunction(
        F=lambda p: np.asarray(p, dtype=float)[..., 2],
        grad=lambda p: np.broadcast_to([0.0, 0.0, 1.0], np.shape(p)).copy(),
        hess=lambda p: np.zeros(np.shape(p)[:-1] + (3, 3)))


def sphere(R: float) -> ImplicitFunction:
    """F = |x|^2 - R^2."""
    return ImplicitFunction(
        F=lambda p: np.sum(np.asarray(p, dtype=float) ** 2, axis=-1) - R * R,
        grad=lambda p: 2.0 * np.asarray(p, dtype=float),
        hess=lambda p: np.broadcast_to(2.0 * np.eye(3), np.shape(p)[:-1] + (3, 3)).copy())


def level_set_mean_curvature(surface: ImplicitFunction, pts) -> np.ndarray:
    """div(grad F / |grad F|) at ``pts`` from the analytic derivatives.

    Equals (|g|^2 tr H - g.H.g) / |g|^3; for a sphere of radius R this is 2/R.
    """
    pts = np.asarray(pts, dtype=float)
    g = surface.grad(pts)
    H = surface.hess(pts)
    g2 = np.sum(g * g, axis=-1)
    if np.any(g2 <= 0):
        raise GeometryError("critical point of F on the sample set")
    tr = np.trace(H, axis1=-2, axis2=-1)
    gHg = np.einsum("...i,...ij,...j->...", g, H, g)
    return (g2 * tr - gHg) / g2**1.5


@dataclass(frozen=True)
class BlowDownFit:
    slope: float
    offset: float
    slope_expected: float
    offset_expected: float
    decay_rate: float


def blow_down_fit(surface: ScherkSurface, x1_range=(20.0, 40.0), decay_range=(2.0, 12.0),
                  n_samples: int = 200) -> BlowDownFit:
    """Fit the upper end to slope |x1| + offset and measure the decay of the remainder.

    The decay rate is the slope of log|z - asymptote| against x1 on
    ``decay_range``, averaged over x2; it is negative for an exponential approach.
    """
    lo, hi = x1_range
    if lo < 10 or hi <= lo:
        raise ValidationError("the fit range must satisfy 10 <= lo < hi")
    eps = surface.eps
    x1 = np.linspace(lo, hi, n_samples)
    x2 = np.linspace(-math.pi, math.pi, 9)[:-1]
    X1, X2 = np.meshgrid(x1, x2)
    z = surface.solve_z(X1, X2)
    A = np.column_stack([X1.ravel(), np.ones(X1.size)])
    (slope, offset), *_ = np.linalg.lstsq(A, z.ravel(), rcond=None)
    k_exp = math.tan(eps)
    b_exp = -2.0 * math.sin(eps) * math.log(math.tan(eps))
    xd = np.linspace(*decay_range, 60)
    Xd, X2d = np.meshgrid(xd, np.array([0.0, 1.0, 2.0]))
    rem = np.abs(surface.solve_z(Xd, X2d) - (k_exp * Xd + b_exp))
    rate = float(np.mean([np.polyfit(xd, np.log(r), 1)[0] for r in rem]))
    return BlowDownFit(float(slope), float(offset), k_exp, b_exp, rate)


def blow_up_defect(eps: float, window: float = 2.0, inner: float = 1.05, n: int = 81) -> float:
    """Max of |x~1^2 + x~2^2 - cosh^2 z~| over zero-set points with x~ = x / (2 sin eps).

    The window is the annulus inner <= |(x~1, x~2)| <= window.
    """
    surf = ScherkSurface(eps)
    t = np.linspace(-window, window, n)
    T1, T2 = np.meshgrid(t, t)
    rad = np.hypot(T1, T2)
    sel = (rad >= inner) & (rad <= window)
    scale = 2.0 * math.sin(eps)
    z = surf.solve_z(scale * T1[sel], scale * T2[sel])
    ok = np.isfinite(z)
    zt = z[ok] / scale
    d = T1[sel][ok] ** 2 + T2[sel][ok] ** 2 - np.cosh(zt) ** 2
    return float(np.max(np.abs(d)))


def waist_radius(eps: float) -> float:
    """Blown-up distance from the axis of the zero set at z = 0 along x2 = 0."""
    surf = ScherkSurface(eps)
    x1 = surf.solve_x1(np.array(0.0), np.array(0.0))
    return float(x1) / (2.0 * math.sin(eps))
