"""The unit n-catenoid in R^{n+1}.

The catenoid is X0(s, theta) = (phi(s) theta, psi(s)) with
phi'' = phi + (n-2) phi^{3-2n}, psi' = phi^{2-n}, phi(0) = 1, phi'(0) = 0.
The profile is integrated numerically; the closed form
phi^{n-1} = cosh((n-1)s) is only used by the tests as an independent check.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BPoly
from scipy.optimize import brentq

from .errors import ConvergenceError, GeometryError, ValidationError


def _rk4(n: int, h: float, steps: int):
    """Classical RK4 for (phi, phi', psi) from (1, 0, 0); scalar loop for speed."""
    out = np.empty((steps + 1, 3))
    a, b, c = 1.0, 0.0, 0.0
    out[0] = a, b, c
    e1, e2 = 3 - 2 * n, 2 - n
    hh = 0.5 * h
    for i in range(steps):
        k1a, k1b, k1c = b, a + (n - 2) * a**e1, a**e2
        a2, b2 = a + hh * k1a, b + hh * k1b
        k2a, k2b, k2c = b2, a2 + (n - 2) * a2**e1, a2**e2
        a3, b3 = a + hh * k2a, b + hh * k2b
        k3a, k3b, k3c = b3, a3 + (n - 2) * a3**e1, a3**e2
        a4, b4 = a + h * k3a, b + h * k3b
        k4a, k4b, k4c = b4, a4 + (n - 2) * a4**e1, a4**e2
        a += h / 6.0 * (k1a + 2 * k2a + 2 * k3a + k4a)
        b += h / 6.0 * (k1b + 2 * k2b + 2 * k3b + k4b)
        c += h / 6.0 * (k1c + 2 * k2c + 2 * k3c + k4c)
        out[i + 1] = a, b, c
    return out


@dataclass(frozen=True)
class CatenoidProfile:
    """Tabulated profile of the unit n-catenoid on [0, s_max].

    Values at negative s follow from parity: phi is even and psi is odd.
    """

    n: int
    s: np.ndarray = field(repr=False)
    phi_nodes: np.ndarray = field(repr=False)
    dphi_nodes: np.ndarray = field(repr=False)
    psi_nodes: np.ndarray = field(repr=False)
    c_inf: float
    tail: float
    _phi: BPoly = field(repr=False, compare=False)
    _dphi: BPoly = field(repr=False, compare=False)
    _psi: BPoly = field(repr=False, compare=False)

    @property
    def s_max(self) -> float:
        return float(self.s[-1])

    @property
    def step(self) -> float:
        return float(self.s[1] - self.s[0])

    def _check(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(np.abs(s) > self.s_max * (1 + 1e-12)):
            raise ValidationError(f"s outside the tabulated range [-{self.s_max}, {self.s_max}]")
        return s

    def phi(self, s) -> np.ndarray:
        s = self._check(s)
        return self._phi(np.abs(s))

    def dphi(self, s) -> np.ndarray:
        s = self._check(s)
        return np.sign(s) * self._dphi(np.abs(s))

    def ddphi(self, s) -> np.ndarray:
        ph = self.phi(s)
        return ph + (self.n - 2) * ph ** (3 - 2 * self.n)

    def psi(self, s) -> np.ndarray:
        s = self._check(s)
        return np.sign(s) * self._psi(np.abs(s))

    def dpsi(self, s) -> np.ndarray:
        return self.phi(s) ** (2 - self.n)

    def mirrored(self):
        """Grid on [-s_max, s_max] with phi, phi', psi extended by parity."""
        s = np.concatenate([-self.s[:0:-1], self.s])
        phi = np.concatenate([self.phi_nodes[:0:-1], self.phi_nodes])
        dphi = np.concatenate([-self.dphi_nodes[:0:-1], self.dphi_nodes])
        psi = np.concatenate([-self.psi_nodes[:0:-1], self.psi_nodes])
        return s, phi, dphi, psi

    def energy_defect(self) -> np.ndarray:
        """Relative defect of phi'^2 + phi^{4-2n} = phi^2 at the nodes."""
        ph, dph = self.phi_nodes, self.dphi_nodes
        return np.abs(dph**2 + ph ** (4 - 2 * self.n) - ph**2) / ph**2


def _quintic_hermite(x, y, dy, ddy) -> BPoly:
    """C^2 piecewise quintic matching values and two derivatives at the nodes."""
    d = np.diff(x)
    c = np.empty((6, d.size))
    c[0] = y[:-1]
    c[1] = y[:-1] + d * dy[:-1] / 5
    c[2] = y[:-1] + 2 * d * dy[:-1] / 5 + d**2 * ddy[:-1] / 20
    c[3] = y[1:] - 2 * d * dy[1:] / 5 + d**2 * ddy[1:] / 20
    c[4] = y[1:] - d * dy[1:] / 5
    c[5] = y[1:]
    return BPoly(c, x)


def solve_profile(n: int, s_max: float = 8.0, tol: float = 1e-8, step: float = 1e-3) -> CatenoidProfile:
    """Integrate the profile ODE with classical RK4 and estimate c_inf.

    Parameters
    ----------
    n : int
        Dimension of the catenoid (n >= 3; n = 2 is allowed for cross-checks).
    s_max : float
        End of the tabulated range, at least 5.
    tol : float
        Bound on the error of the analytic tail used for c_inf.
    step : float
        Maximal RK4 step, at most 1e-3.
    """
    if n < 2:
        raise ValidationError("n must be at least 2")
    if s_max < 5:
        raise ValidationError("s_max must be at least 5")
    if not 0 < step <= 1e-3:
        raise ValidationError("step must be in (0, 1e-3]")
    steps = int(math.ceil(s_max / step))
    h = s_max / steps
    y = _rk4(n, h, steps)
    if not np.all(np.isfinite(y)):
        raise ConvergenceError("profile integration produced non-finite values")
    s = np.linspace(0.0, s_max, steps + 1)
    phi, dphi, psi = y[:, 0], y[:, 1], y[:, 2]
    ddphi = phi + (n - 2) * phi ** (3 - 2 * n)
    dpsi = phi ** (2 - n)
    ddpsi = (2 - n) * phi ** (1 - n) * dphi

    if n == 2:
        c_inf, tail = math.inf, math.inf
    else:
        # phi^{n-1} ~ e^{(n-1)s}/2 beyond s_max; relative error of that is e^{-2(n-1)s}
        tail = 2.0 ** ((n - 2) / (n - 1)) * math.exp(-(n - 2) * s_max) / (n - 2)
        tail_err = tail * math.exp(-2 * (n - 1) * s_max)
        if tail_err > tol:
            raise ConvergenceError(f"tail estimate error {tail_err:.2e} exceeds tol; raise s_max")
        c_inf = float(psi[-1] + tail)

    phi_poly = _quintic_hermite(s, phi, dphi, ddphi)
    psi_poly = _quintic_hermite(s, psi, dpsi, ddpsi)
    # phi' gets its own interpolant: differentiating phi_poly loses digits as 1/step
    dddphi = dphi * (1 + (n - 2) * (3 - 2 * n) * phi ** (2 - 2 * n))
    dphi_poly = _quintic_hermite(s, dphi, ddphi, dddphi)
    for arr in (s, phi, dphi, psi):
        arr.setflags(write=False)
    return CatenoidProfile(n=n, s=s, phi_nodes=phi, dphi_nodes=dphi, psi_nodes=psi,
                           c_inf=c_inf, tail=tail, _phi=phi_poly, _dphi=dphi_poly,
                           _psi=psi_poly)


def immersion_point(profile: CatenoidProfile, s, theta) -> np.ndarray:
    """X0(s, theta) = (phi(s) theta, psi(s)) for theta on S^{n-1}."""
    s = np.asarray(s, dtype=float)
    theta = np.asarray(theta, dtype=float)
    ph = profile.phi(s)[..., None]
    ps = profile.psi(s)[..., None]
    return np.concatenate([ph * theta, np.broadcast_to(ps, (ph * theta).shape[:-1] + (1,))], axis=-1)


def unit_normal(profile: CatenoidProfile, s, theta) -> np.ndarray:
    """N0 = phi^{-1} (psi' theta, -phi')."""
    s = np.asarray(s, dtype=float)
    theta = np.asarray(theta, dtype=float)
    ph = profile.phi(s)[..., None]
    a = (profile.dpsi(s)[..., None] / ph) * theta
    b = np.broadcast_to(-(profile.dphi(s)[..., None] / ph), a.shape[:-1] + (1,))
    return np.concatenate([a, b], axis=-1)


@dataclass(frozen=True)
class EndExpansion:
    c_inf: float
    a: float
    a_expected: float
    decay_exponent: float
    decay_expected: float
    fit_window: tuple
    decay_window: tuple


def end_expansion_check(profile: CatenoidProfile, r_fit: float = 10.0) -> EndExpansion:
    """Fit the upper end u(r) = psi, r = phi, to c_inf - a r^{2-n}.

    The remainder u - c_inf + r^{2-n}/(n-2) is fitted to a power law on a window
    where it stays well above the integration error.
    """
    n = profile.n
    if n < 3:
        raise ValidationError("the end expansion needs n >= 3")
    r, u = profile.phi_nodes, profile.psi_nodes
    if r[-1] < r_fit:
        raise ValidationError(f"profile only reaches r = {r[-1]:.3g} < {r_fit}")
    sel = r >= r_fit
    A = np.column_stack([np.ones(sel.sum()), -r[sel] ** (2 - n)])
    (c_fit, a_fit), *_ = np.linalg.lstsq(A, u[sel], rcond=None)

    expo = 4 - 3 * n
    r_hi = min(r[-1], (1e-10 * 2 * (3 * n - 4)) ** (1.0 / expo))
    r_lo = max(2.0, r_hi / 5.0)
    win = (r >= r_lo) & (r <= r_hi)
    rem = u[win] - profile.c_inf + r[win] ** (2 - n) / (n - 2)
    if win.sum() < 10 or np.any(rem == 0):
        raise ValidationError("insufficient range for the remainder fit")
    slope = np.polyfit(np.log(r[win]), np.log(np.abs(rem)), 1)[0]
    return EndExpansion(c_inf=float(c_fit), a=float(a_fit), a_expected=1.0 / (n - 2),
                        decay_exponent=float(slope), decay_expected=float(expo),
                        fit_window=(float(r_fit), float(r[-1])),
                        decay_window=(float(r_lo), float(r_hi)))


def neck_truncation(eps: float, rho: float, profile: CatenoidProfile) -> float:
    """The s_eps > 0 with eps * phi(s_eps) = rho."""
    if not 0 < eps <= rho:
        raise ValidationError("need 0 < eps <= rho")
    target = rho / eps
    if target == 1.0:
        return 0.0
    if target > profile.phi_nodes[-1]:
        raise GeometryError(f"rho/eps = {target:.3g} exceeds the tabulated range; raise s_max")
    i = int(np.searchsorted(profile.phi_nodes, target))
    lo, hi = profile.s[max(i - 1, 0)], profile.s[min(i, profile.s.size - 1)]
    f = lambda s: float(profile.phi(s)) - target  # noqa: E731
    if f(lo) == 0.0:
        return float(lo)
    return float(brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))


@lru_cache(maxsize=16)
def cached_profile(n: int, s_max: float = 8.0) -> CatenoidProfile:
    """Memoized :func:`solve_profile` with the default step."""
    return solve_profile(n, s_max)
