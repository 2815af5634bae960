"""Perturbations of the rescaled n-catenoid on the truncated cylinder.

Functions on [-S, S] x S^{n-1} that are even in s and invariant under the
symmetry group are stored as mode coefficients w_j(s) on a uniform grid of
[0, S].  The linear operator is

    L = d^2/ds^2 + Delta_{S^{n-1}} - ((n-2)/2)^2 + n(3n-2)/4 phi^{2-2n},

acting on mode j as w_j'' - (gamma_j^2 - V(s)) w_j with gamma_j the indicial
root.  The nonlinear problem is never expanded symbolically: its residual is
the finite-difference mean curvature of the perturbed immersion.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded
from scipy.sparse.linalg import splu
from scipy.optimize import brentq

from .catenoid import CatenoidProfile, neck_truncation
from .fixedpoint import Anderson
from .errors import DivergenceError, InjectivityError, InputSizeError, ValidationError
from .geometry import derivatives_from_stencil, mean_curvature_oriented, stencil_offsets
from .sphere import InvariantSphereBasis

S_STEP = 1e-2
ANGLE_STEP = 2e-3


def potential(profile: CatenoidProfile, s) -> np.ndarray:
    n = profile.n
    return n * (3 * n - 2) / 4.0 * profile.phi(s) ** (2 - 2 * n)


def uniform_grid(S: float, step: float = S_STEP) -> np.ndarray:
    """Uniform nodes on [0, S] with spacing at most ``step``."""
    N = max(int(math.ceil(S / step - 1e-9)), 4)
    return np.linspace(0.0, S, N + 1)


@dataclass
class NeckField:
    """Even invariant function on [-S, S] x S^{n-1} in mode form."""

    basis: InvariantSphereBasis
    s: np.ndarray
    coeffs: np.ndarray  # (K, len(s))
    delta: float = 0.0

    @property
    def step(self) -> float:
        return float(self.s[1] - self.s[0])

    @property
    def S(self) -> float:
        return float(self.s[-1])

    def copy(self, coeffs=None) -> "NeckField":
        c = self.coeffs.copy() if coeffs is None else np.asarray(coeffs, dtype=float)
        return NeckField(self.basis, self.s, c, self.delta)

    def __add__(self, other: "NeckField") -> "NeckField":
        return self.copy(self.coeffs + other.coeffs)

    def __sub__(self, other: "NeckField") -> "NeckField":
        return self.copy(self.coeffs - other.coeffs)

    def node_values(self) -> np.ndarray:
        """Values at (s node, quadrature node), shape (len(s), Q)."""
        return self.coeffs.T @ self.basis.values.T

    def _derivatives(self):
        h = self.step
        c = self.coeffs
        ext = np.concatenate([c[:, 1:2], c, 2 * c[:, -1:] - c[:, -2:-1]], axis=1)
        d1 = (ext[:, 2:] - ext[:, :-2]) / (2 * h)
        d2 = (ext[:, 2:] - 2 * c + ext[:, :-2]) / h**2
        # one-sided second-order formulas at s = S
        d1[:, -1] = (3 * c[:, -1] - 4 * c[:, -2] + c[:, -3]) / (2 * h)
        d2[:, -1] = (2 * c[:, -1] - 5 * c[:, -2] + 4 * c[:, -3] - c[:, -4]) / h**2
        return d1, d2

    def weighted_norm(self, profile: CatenoidProfile, delta: float | None = None) -> float:
        """sup phi^{-delta} (|w| + |w_s| + |w_ss| + |Delta_theta w|) over grid and sphere nodes."""
        delta = self.delta if delta is None else delta
        d1, d2 = self._derivatives()
        E = self.basis.values.T
        lap = self.basis.eigenvalues[:, None] * self.coeffs
        total = (np.abs(self.coeffs.T @ E) + np.abs(d1.T @ E) + np.abs(d2.T @ E)
                 + np.abs(lap.T @ E))
        weight = profile.phi(self.s) ** (-delta)
        return float(np.max(weight[:, None] * total))


def apply_L_modes(values, s, lam, profile: CatenoidProfile) -> np.ndarray:
    """Second-order FD of L_j on a uniform grid; returns values at s[1:-1].

    ``values`` has shape (..., len(s)) and ``lam`` broadcasts against the
    leading axes.
    """
    values = np.asarray(values, dtype=float)
    n = profile.n
    h = s[1] - s[0]
    lam = np.asarray(lam, dtype=float)[..., None]
    sc = s[1:-1]
    d2 = (values[..., 2:] - 2 * values[..., 1:-1] + values[..., :-2]) / h**2
    coef = -lam - ((n - 2) / 2.0) ** 2 + potential(profile, sc)
    return d2 + coef * values[..., 1:-1]


def _mode_coefficient(field: NeckField, profile: CatenoidProfile) -> np.ndarray:
    n = profile.n
    V = potential(profile, field.s)
    return -field.basis.eigenvalues[:, None] - ((n - 2) / 2.0) ** 2 + V[None, :]


def apply_L(field: NeckField, profile: CatenoidProfile) -> NeckField:
    """L applied mode-wise with the even reflection at s = 0.

    The value at s = S uses a one-sided second difference.
    """
    d1, d2 = field._derivatives()
    out = d2 + _mode_coefficient(field, profile) * field.coeffs
    return field.copy(out)


def jacobi_fields(profile: CatenoidProfile, s):
    """The two rotationally symmetric Jacobi fields (odd, even)."""
    n = profile.n
    ph, dph = profile.phi(s), profile.dphi(s)
    minus = (n - 2) / 2.0 * ph ** ((n - 4) / 2.0) * dph
    plus = ph ** ((n - 4) / 2.0) * (ph * profile.dpsi(s) - profile.psi(s) * dph)
    return minus, plus


def largest_jacobi_zero(profile: CatenoidProfile, tol: float = 1e-10) -> float:
    """Largest zero s_0 > 0 of the even Jacobi field.

    Returns 0 with a warning when no sign change is found on the tabulated range.
    """
    s = profile.s
    _, plus = jacobi_fields(profile, s)
    sign = np.sign(plus)
    idx = np.nonzero(sign[1:] * sign[:-1] < 0)[0]
    if idx.size == 0:
        warnings.warn("no sign change of the even Jacobi field on the tabulated range")
        return 0.0
    i = int(idx[-1])
    f = lambda t: float(jacobi_fields(profile, t)[1])  # noqa: E731
    return float(brentq(f, s[i], s[i + 1], xtol=tol))


def green_solve(f: NeckField, profile: CatenoidProfile, s0: float | None = None) -> NeckField:
    """Solve L w = f on (-S, S) with w(+-S) = 0 and w even.

    Each mode is a tridiagonal two-point problem on [0, S]: a ghost node gives
    the Neumann condition at s = 0 and the Dirichlet value is imposed at S.
    """
    S = f.S
    if s0 is None:
        s0 = largest_jacobi_zero(profile)
    if S <= s0:
        raise InjectivityError(f"S = {S:.4g} must exceed the Jacobi zero s0 = {s0:.4g}")
    h = f.step
    N = f.s.size - 1
    coef = _mode_coefficient(f, profile)[:, :N]
    out = np.zeros_like(f.coeffs)
    for j in range(f.coeffs.shape[0]):
        ab = np.zeros((3, N))
        ab[0, 1:] = 1.0 / h**2
        ab[0, 1] = 2.0 / h**2
        ab[1, :] = -2.0 / h**2 + coef[j]
        ab[2, :-1] = 1.0 / h**2
        try:
            out[j, :N] = solve_banded((1, 1), ab, f.coeffs[j, :N])
        except np.linalg.LinAlgError as exc:
            raise InjectivityError(f"singular two-point problem for mode {j}") from exc
    return f.copy(out)


def poisson_extend(g, basis: InvariantSphereBasis, s, delta: float | None = None) -> NeckField:
    """Decaying solution of Delta_0 w = 0 on [0, inf) with w(0) = g, on nodes ``s``."""
    g = np.asarray(g, dtype=float)
    s = np.asarray(s, dtype=float)
    gam = basis.roots
    coeffs = g[:, None] * np.exp(-gam[:, None] * s[None, :])
    d = (2 - basis.n) / 2.0 if delta is None else delta
    return NeckField(basis, s, coeffs, d)


def build_tilde_w(h, eps: float, rho: float, profile: CatenoidProfile,
                  basis: InvariantSphereBasis, kappa: float | None = None,
                  s=None) -> NeckField:
    """Sum of two Poisson extensions placing g = phi(s_eps)^{(n-2)/2} h at both ends."""
    h = np.asarray(h, dtype=float)
    n = profile.n
    if kappa is not None and basis.c2_norm(h) > kappa * eps ** (n - 1) * (1 + 1e-12):
        raise InputSizeError(
            f"|h| = {basis.c2_norm(h):.3e} exceeds kappa eps^(n-1) = {kappa * eps ** (n - 1):.3e}")
    s_eps = neck_truncation(eps, rho, profile)
    if s is None:
        s = uniform_grid(s_eps)
    g = profile.phi(s_eps) ** ((n - 2) / 2.0) * h
    gam = basis.roots[:, None]
    coeffs = g[:, None] * (np.exp(-gam * (s_eps - s[None, :])) + np.exp(-gam * (s_eps + s[None, :])))
    return NeckField(basis, np.asarray(s, dtype=float), coeffs, 0.0)


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10 - 15 * t + 6 * t**2)


# the normal field is vertical outside radius VERTICAL_FRACTION * rho, so the
# annulus rho/2 <= r <= rho is a vertical graph
VERTICAL_FRACTION = 0.45


def interpolating_normal(profile: CatenoidProfile, s, s_eps: float) -> tuple:
    """Radial and vertical components (rad, xi) of the interpolating normal field.

    The catenoid normal near the neck, the vertical -1 (+1) for |s| >= s_b with
    phi(s_b) = VERTICAL_FRACTION phi(s_eps), and in between the normalized
    C^2 quintic blend of the two vectors.
    """
    ratio = VERTICAL_FRACTION * float(profile.phi(s_eps))
    if ratio <= 1.0:
        raise ValidationError("eps too large: the vertical region does not fit in the neck")
    s = np.asarray(s, dtype=float)
    t = np.abs(s)
    s_b = neck_truncation(1.0, ratio, profile)
    s_a = max(s_eps - 2.0, 0.0)
    beta = _smoothstep((t - s_a) / (s_b - s_a))
    xi0 = -profile.dphi(s) / profile.phi(s)
    rad = (1 - beta) * np.sqrt(1.0 - xi0**2)
    xi = (1 - beta) * xi0 - beta * np.sign(s)
    norm = np.hypot(rad, xi)
    return rad / norm, xi / norm


def interpolating_xi(profile: CatenoidProfile, s, s_eps: float) -> np.ndarray:
    """Vertical component of :func:`interpolating_normal`."""
    return interpolating_normal(profile, s, s_eps)[1]


class NeckOperator:
    """Discrete residual of the minimal surface equation for X_w.

    The residual is R(w) = n eps^2 phi^{(n+2)/2} (H(X_w) - H(eps X_0)) at
    interior s nodes and sphere quadrature nodes, projected on the modes.  Its
    linear part is L up to discretization and the change of normal field.
    """

    def __init__(self, basis: InvariantSphereBasis, profile: CatenoidProfile, eps: float,
                 rho: float, step: float = S_STEP, angle_step: float = ANGLE_STEP):
        if basis.n != profile.n:
            raise ValidationError("basis and profile dimensions differ")
        self.basis, self.profile = basis, profile
        self.n = n = profile.n
        self.eps, self.rho = eps, rho
        self.s_eps = neck_truncation(eps, rho, profile)
        self.s0 = largest_jacobi_zero(profile)
        if self.s_eps <= self.s0:
            raise InjectivityError(
                f"s_eps = {self.s_eps:.4g} <= s0 = {self.s0:.4g}; decrease eps")
        self.s = uniform_grid(self.s_eps, step)
        self.h = self.s[1] - self.s[0]
        self.angle_step = angle_step
        se = np.concatenate([[-self.h], self.s])  # index 0 is the ghost s = -h
        self.phi = profile.phi(se)
        self.psi = profile.psi(se)
        self.rad, self.xi = interpolating_normal(profile, se, self.s_eps)
        self.omega = self.phi ** ((2 - n) / 2.0)

        offs = stencil_offsets(n)
        self.s_shift = offs[:, 0].astype(int)
        theta = basis.full_points()
        Q = theta.shape[0]
        frames = np.empty((Q, n, n - 1))
        for q in range(Q):
            Qm, _ = np.linalg.qr(np.column_stack([theta[q], np.eye(n)]))
            frames[q] = Qm[:, 1:n]
        pts = theta[:, None, :] + angle_step * np.einsum("qab,pb->qpa", frames, offs[:, 1:])
        self.theta = pts / np.linalg.norm(pts, axis=-1, keepdims=True)  # (Q, P, n)
        self.E = basis.eval_full(self.theta)  # (Q, P, K)
        self.steps = np.array([self.h] + [angle_step] * (n - 1))
        self.scale = n * eps**2 * self.phi[1:-1] ** ((n + 2) / 2.0)
        self.H0 = self._curvature(np.zeros((len(basis), self.s.size)))
        self.chord = None          # LU of a full Jacobian, shared between solves
        self.prefer_chord = False  # set once the plain iteration failed to contract

    def _curvature(self, coeffs) -> np.ndarray:
        """H of X_w at interior nodes (s_0 .. s_{N-1}) x quadrature nodes."""
        eps = self.eps
        N = self.s.size - 1
        ext = np.concatenate([coeffs[:, 1:2], coeffs], axis=1)  # even ghost at -h
        P = self.theta.shape[1]
        Q = self.theta.shape[0]
        pts = np.empty((N, Q, P, self.n + 1))
        for p in range(P):
            idx = np.arange(N) + 1 + self.s_shift[p]
            w = ext[:, idx].T @ self.E[:, p, :].T  # (N, Q)
            rad = eps * self.phi[idx, None] + self.omega[idx, None] * self.rad[idx, None] * w
            pts[:, :, p, :-1] = rad[..., None] * self.theta[None, :, p, :]
            pts[:, :, p, -1] = eps * self.psi[idx, None] + self.omega[idx, None] * self.xi[idx, None] * w
        Xi, Xij = derivatives_from_stencil(pts, self.steps)
        ctr = np.arange(N) + 1
        orient = np.concatenate([
            self.rad[ctr, None, None] * self.theta[None, :, 0, :],
            np.broadcast_to(self.xi[ctr, None, None], (N, Q, 1))], axis=-1)
        return mean_curvature_oriented(Xi, Xij, orient)

    def residual_nodes(self, coeffs) -> np.ndarray:
        """Rescaled curvature residual at (interior s node, quadrature node)."""
        return self.scale[:, None] * (self._curvature(coeffs) - self.H0)

    def residual(self, coeffs) -> np.ndarray:
        """Mode coefficients of the residual at interior s nodes, shape (K, N)."""
        return self.basis.project(self.residual_nodes(coeffs).T)

    def field(self, coeffs) -> NeckField:
        return NeckField(self.basis, self.s, np.asarray(coeffs, dtype=float), 0.0)


@dataclass
class NeckSolution:
    eps: float
    rho: float
    s_eps: float
    h: np.ndarray
    w: NeckField = field(repr=False)
    v: NeckField = field(repr=False)
    tilde_w: NeckField = field(repr=False)
    history: list = field(default_factory=list)
    residual: float = 0.0
    annulus_r: np.ndarray = field(default=None, repr=False)
    annulus_W: np.ndarray = field(default=None, repr=False)
    annulus_V: np.ndarray = field(default=None, repr=False)
    V_rho: np.ndarray = field(default=None, repr=False)
    dV_rho: np.ndarray = field(default=None, repr=False)
    Z_rho: np.ndarray = field(default=None, repr=False)
    dZ_rho: np.ndarray = field(default=None, repr=False)

    @property
    def iterations(self) -> int:
        return len(self.history)

    def contraction_ratios(self) -> list:
        hist = self.history
        return [hist[i + 1] / hist[i] for i in range(len(hist) - 1) if hist[i] > 0]

    def V_norm(self, basis: InvariantSphereBasis | None = None) -> float:
        return annulus_norm(self.annulus_r, self.annulus_V, (basis or self.w.basis))


def annulus_norm(r, V, basis: InvariantSphereBasis) -> float:
    """sup over the annulus of |V| + |V_r| + |V_rr| + |Delta_theta V| / r^2."""
    vals = V.T @ basis.values.T
    d1 = np.gradient(V, r, axis=1, edge_order=2).T @ basis.values.T
    d2 = np.gradient(np.gradient(V, r, axis=1, edge_order=2), r, axis=1, edge_order=2).T @ basis.values.T
    lap = (basis.eigenvalues[:, None] * V).T @ basis.values.T / r[:, None] ** 2
    return float(np.max(np.abs(vals) + np.abs(d1) + np.abs(d2) + np.abs(lap)))


def _backward_derivative(c, h):
    """Fourth-order one-sided derivative at the last node along the last axis."""
    return (25 * c[..., -1] - 48 * c[..., -2] + 36 * c[..., -3] - 16 * c[..., -4] + 3 * c[..., -5]) / (12 * h)


def upper_graph(op: NeckOperator, w: NeckField, h) -> dict:
    """Graph data of the upper boundary region over the z = 0 hyperplane.

    Near s = s_eps the normal field is vertical, so the surface is the graph
    z = eps psi(s) - w phi^{(2-n)/2} at r = eps phi(s).
    """
    basis, prof = op.basis, op.profile
    n, eps, rho = op.n, op.eps, op.rho
    h = np.asarray(h, dtype=float)
    one = basis.constant_coeffs(1.0)
    ell = basis.degrees
    s = w.s
    ph, ps = prof.phi(s), prof.psi(s)
    om = ph ** ((2 - n) / 2.0)
    r = eps * ph
    Z = eps * ps[None, :] * one[:, None] - w.coeffs * om[None, :]
    sel = r >= 0.5 * rho * (1 - 1e-12)
    W = h[:, None] * (r[None, sel] / rho) ** ell[:, None]
    V = eps * prof.c_inf * one[:, None] - W - Z[:, sel]

    dw = _backward_derivative(w.coeffs, w.step)
    phe, dphe = prof.phi(op.s_eps), prof.dphi(op.s_eps)
    ome = phe ** ((2 - n) / 2.0)
    dome = (2 - n) / 2.0 * phe ** (-n / 2.0) * dphe
    dZ_ds = eps * prof.dpsi(op.s_eps) * one - (dw * ome + w.coeffs[:, -1] * dome)
    dZ_dr = dZ_ds / (eps * dphe)
    Z_rho = Z[:, -1]
    V_rho = eps * prof.c_inf * one - h - Z_rho
    dV_rho = -dZ_dr - ell * h / rho
    return dict(r=r[sel], W=W, V=V, Z_rho=Z_rho, dZ_rho=dZ_dr, V_rho=V_rho, dV_rho=dV_rho)


def catenoid_predictor(op: NeckOperator, tw) -> np.ndarray | None:
    """Initial v for the solve from the dilated catenoid through the boundary ring.

    The mean of the boundary value of ``tw`` fixes a height Z at radius rho;
    the catenoid eps' X0 on the stable branch through (rho, Z) is written as a
    normal graph over eps X0 along the interpolating normal.  Returns None
    when no such catenoid exists.
    """
    prof, eps, rho = op.profile, op.eps, op.rho
    vol = op.basis.constant_coeffs(1.0)[0]
    omega, xi, rad = op.omega[1:], op.xi[1:], op.rad[1:]
    Z = eps * float(prof.psi(op.s_eps)) + omega[-1] * xi[-1] * tw[0, -1] / vol
    height = lambda e: e * float(prof.psi(neck_truncation(e, rho, prof))) - Z  # noqa: E731
    grid = np.linspace(0.2 * eps, rho, 200, endpoint=False)
    vals = np.array([height(e) for e in grid])
    top = int(np.argmax(vals))
    if vals[top] < 0 or vals[0] > 0:
        return None
    e1 = brentq(height, grid[0], grid[top]) if top > 0 else grid[0]
    s1 = neck_truncation(e1, rho, prof)
    sig = np.linspace(-1.0, 1.0, 1201) * min(1.5 * s1, prof.s_max)
    cx, cz = e1 * prof.phi(sig), e1 * prof.psi(sig)
    t = np.empty(op.s.size)
    for i, si in enumerate(op.s):
        bx, bz = eps * op.phi[i + 1], eps * op.psi[i + 1]
        cross = (cx - bx) * xi[i] - (cz - bz) * rad[i]
        j = np.nonzero(np.diff(np.sign(cross)))[0]
        if j.size == 0:
            return None
        j = j[np.argmin(np.abs(sig[j] - si))]
        f = lambda q: ((e1 * prof.phi(q) - bx) * xi[i]  # noqa: E731
                       - (e1 * prof.psi(q) - bz) * rad[i])
        q = brentq(f, sig[j], sig[j + 1])
        t[i] = (e1 * prof.phi(q) - bx) * rad[i] + (e1 * prof.psi(q) - bz) * xi[i]
    v = np.zeros_like(tw)
    v[0] = vol * t / omega - tw[0]
    v[:, -1] = 0.0
    return v


def full_jacobian(op: NeckOperator, w, step: float = 1e-5):
    """Sparse Jacobian of all residual modes with respect to w at interior nodes.

    Unknowns and residuals are ordered mode-major (k * N + i).  Node i only
    couples to nodes i-1, i, i+1, so 3 K colored perturbations suffice.
    """
    from scipy.sparse import coo_matrix
    K, N = w.shape[0], op.s.size - 1
    rows, cols_, vals = [], [], []
    for k in range(K):
        for c in range(3):
            cols = np.arange(c, N, 3)
            pert = np.array(w, dtype=float, copy=True)
            pert[k, cols] += step
            dR = op.residual(pert)
            pert[k, cols] -= 2 * step
            dR = (dR - op.residual(pert)) / (2 * step)  # (K, N)
            for off in (-1, 0, 1):
                tgt = cols + off
                ok = (tgt >= 0) & (tgt < N)
                for j in range(K):
                    rows.append(j * N + tgt[ok])
                    cols_.append(k * N + cols[ok])
                    vals.append(dR[j, tgt[ok]])
    return coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols_))),
                      shape=(K * N, K * N)).tocsc()


def solve_neck(h, eps: float, rho: float, basis: InvariantSphereBasis, profile: CatenoidProfile,
               delta: float = 0.0, kappa: float | None = None, tol: float = 1e-10,
               max_iter: int = 60, operator: NeckOperator | None = None,
               v0: np.ndarray | None = None, depth: int = 5) -> NeckSolution:
    """Minimal perturbation of the eps-catenoid with boundary data h.

    Iterates v <- G(L v - R(w~ + v)) with Anderson mixing of the given
    depth (0 is plain Picard); a fixed point makes the discrete mean
    curvature of X_{w~+v} vanish at every interior node.  Without ``v0`` the
    iteration starts from :func:`catenoid_predictor`.  When the contraction
    stalls, which happens once the neck is noticeably dilated, the iteration
    switches to chord Newton steps with the full sparse Jacobian.
    """
    n = profile.n
    if not (2 - n) / 2.0 < delta < (n - 2) / 2.0:
        raise ValidationError(f"delta must lie in ({(2 - n) / 2}, {(n - 2) / 2})")
    op = operator or NeckOperator(basis, profile, eps, rho)
    h = np.asarray(h, dtype=float)
    tw = build_tilde_w(h, eps, rho, profile, basis, kappa, s=op.s)
    tw.delta = delta
    N = op.s.size - 1
    starts = [] if v0 is None else [np.array(v0, dtype=float)]
    if h[0] != 0:
        pred = catenoid_predictor(op, tw.coeffs)
        if pred is not None:
            starts.append(pred)
    if not starts:
        starts.append(np.zeros_like(tw.coeffs))
    if len(starts) > 1:
        res = [np.max(np.abs(op.residual(tw.coeffs + v))) for v in starts]
        starts = [starts[int(np.argmin(res))]]
    v = starts[0]
    v[:, -1] = 0.0
    history = []
    mixer = Anderson(depth)
    # chord Jacobians are cached on the operator and reused by later solves
    lu = op.chord if op.prefer_chord else None
    fresh = 0
    best, newton_start = None, 0
    for _ in range(max_iter):
        w = tw.coeffs + v
        Rw = op.residual(w)
        if lu is None:
            Lv = apply_L(op.field(v), profile).coeffs[:, :N]
            rhs = op.field(np.zeros_like(v))
            rhs.coeffs[:, :N] = Lv - Rw
            v_new = green_solve(rhs, profile, op.s0).coeffs
        else:
            v_new = v.copy()
            v_new[:, :N] -= lu.solve(Rw.ravel()).reshape(Rw.shape)
        diff = NeckField(basis, op.s, v_new - v, delta).weighted_norm(profile)
        history.append(diff)
        if not np.isfinite(diff):
            raise DivergenceError("neck iteration produced non-finite values", history)
        if diff < tol:
            v = v_new
            break
        if best is None or diff < best[0]:
            best = (diff, v.copy())
        if lu is None:
            switch = len(history) > 1 and history[-1] > 0.5 * history[-2]
        else:
            switch = len(history) - newton_start > 1 and history[-1] > 0.5 * history[-2]
            if switch and fresh and history[-1] > 10 * history[newton_start]:
                raise DivergenceError("neck Newton iteration is not contracting", history)
        if switch:
            v = best[1]
            if lu is None and op.chord is not None:
                lu = op.chord
            else:
                if fresh >= 3:
                    raise DivergenceError("neck Newton iteration is not contracting", history)
                lu = op.chord = splu(full_jacobian(op, tw.coeffs + v))
                fresh += 1
            op.prefer_chord = True
            newton_start = len(history)
            continue
        v = v_new if lu is not None else mixer.step(v, v_new)
        v[:, -1] = 0.0
    else:
        if history[-1] > 1e3 * tol:
            raise DivergenceError(f"neck iteration stalled at {history[-1]:.2e}", history)
    w = tw + op.field(v)
    w.delta = delta
    res = float(np.max(np.abs(op.residual_nodes(w.coeffs))))
    graph = upper_graph(op, w, h)
    return NeckSolution(eps=eps, rho=rho, s_eps=op.s_eps, h=h, w=w, v=op.field(v), tilde_w=tw,
                        history=history, residual=res, annulus_r=graph["r"],
                        annulus_W=graph["W"], annulus_V=graph["V"], V_rho=graph["V_rho"],
                        dV_rho=graph["dV_rho"], Z_rho=graph["Z_rho"], dZ_rho=graph["dZ_rho"])


def neck_lipschitz_probe(h1, h2, eps: float, rho: float, basis: InvariantSphereBasis,
                         profile: CatenoidProfile, delta: float = 0.0,
                         operator: NeckOperator | None = None) -> float:
    """|V_{eps,h2} - V_{eps,h1}| / |h2 - h1| with the annulus norm and the boundary norm."""
    h1 = np.asarray(h1, dtype=float)
    h2 = np.asarray(h2, dtype=float)
    dh = basis.c2_norm(h2 - h1)
    if dh == 0.0:
        return 0.0
    op = operator or NeckOperator(basis, profile, eps, rho)
    a = solve_neck(h1, eps, rho, basis, profile, delta, operator=op)
    b = solve_neck(h2, eps, rho, basis, profile, delta, operator=op)
    return annulus_norm(a.annulus_r, b.annulus_V - a.annulus_V, basis) / dh


def solve_neck_continued(h, h_prev, v_prev, eps: float, rho: float, basis: InvariantSphereBasis,
                         profile: CatenoidProfile, delta: float = 0.0,
                         operator: NeckOperator | None = None, max_depth: int = 5,
                         **kw) -> NeckSolution:
    """:func:`solve_neck` with continuation from a solved pair (h_prev, v_prev).

    The direct solve is tried first; on divergence the path from h_prev to h
    is bisected, each stage warm-started from the previous one.
    """
    op = operator or NeckOperator(basis, profile, eps, rho)
    h = np.asarray(h, dtype=float)
    try:
        return solve_neck(h, eps, rho, basis, profile, delta, operator=op, v0=v_prev, **kw)
    except DivergenceError:
        if max_depth == 0:
            raise
    h_prev = np.zeros_like(h) if h_prev is None else np.asarray(h_prev, dtype=float)
    mid = 0.5 * (h + h_prev)
    half = solve_neck_continued(mid, h_prev, v_prev, eps, rho, basis, profile, delta, op,
                                max_depth - 1, **kw)
    return solve_neck_continued(h, mid, half.v.coeffs, eps, rho, basis, profile, delta, op,
                                max_depth - 1, **kw)
