"""Matching the neck and the outer graph across the sphere of radius rho.

Upper half of the surface, written as graphs over z = 0 near r = rho:

    neck side    z = eps c_inf - W_h - V_{eps,h}
    outer side   z = eps c_inf - W^_g - V^_g

with W_h the interior and W^_g the exterior harmonic extension.  Equal values
and radial derivatives on the sphere give g = h + V_n and

    (Lambda - B) h = B V_n + rho (V^' - V_n'),

where Lambda = diag(l) and B = rho d_r W^ on the modes.  Nonlinear terms are
frozen, the linear system is solved exactly, and the corrections recomputed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .catenoid import CatenoidProfile
from .errors import (AssemblyError, DivergenceError, GeometryError, TailTooShortError,
                     ValidationError)
from .geometry import mean_curvature_stencil
from .lattice import Lattice, lattice_volume, sphere_volume
from .fixedpoint import Anderson
from .neck import NeckOperator, NeckSolution, interpolating_normal, solve_neck_continued
from .outer import (OuterSolution, QuotientDomainGrid, ball_harmonic_extension,
                    graph_nonlinearity, harmonic_extension_outer, solve_outer_graph)
from .sphere import InvariantSphereBasis


@dataclass(frozen=True)
class DtNOperator:
    """U = Lambda - B on the truncated invariant basis."""

    matrix: np.ndarray
    B: np.ndarray
    Lam: np.ndarray
    singular_values: np.ndarray

    @property
    def smallest_singular_value(self) -> float:
        return float(self.singular_values[-1])

    def solve(self, rhs) -> np.ndarray:
        return np.linalg.solve(self.matrix, rhs)


def dtn_operator(basis: InvariantSphereBasis, rho: float, grid: QuotientDomainGrid,
                 nu: float | None = None) -> DtNOperator:
    """Assemble U(h) = rho d_r (W_h - W^_h) at r = rho column by column."""
    K = len(basis)
    B = np.empty((K, K))
    Lam = np.empty((K, K))
    for j in range(K):
        e = np.zeros(K)
        e[j] = 1.0
        W_out = harmonic_extension_outer(e, grid, nu)
        B[:, j] = rho * basis.project(grid.normal_derivative(W_out))
        Lam[:, j] = rho * ball_harmonic_extension(e, rho, basis).radial_derivative_at_rho()
    U = Lam - B
    sv = np.linalg.svd(U, compute_uv=False)
    if not np.all(np.isfinite(sv)) or sv[-1] <= 1e-12 * sv[0]:
        raise AssemblyError(f"DtN operator is singular (smallest singular value {sv[-1]:.3e})")
    return DtNOperator(U, B, Lam, sv)


@dataclass
class MatchState:
    eps: float
    g: np.ndarray
    h: np.ndarray
    iteration: int = 0
    dirichlet: float = math.inf
    neumann: float = math.inf
    history: list = field(default_factory=list)

    @property
    def contraction(self) -> list:
        """Ratios of successive (g, h) updates."""
        steps = [rec["step"] for rec in self.history]
        return [b / a for a, b in zip(steps[:-1], steps[1:]) if a > 0]


def _mismatch(neck: NeckSolution, outer: OuterSolution, basis: InvariantSphereBasis,
              eps: float, c_inf: float):
    """Sup-norm gaps of height and radial slope on the sphere."""
    c = eps * c_inf * basis.constant_coeffs(1.0)
    z_out = c - outer.g
    z_neck = neck.Z_rho
    dz_out = outer.du_sphere
    dz_neck = neck.dZ_rho
    return basis.sup_norm(z_out - z_neck), basis.sup_norm(dz_out - dz_neck)


def match_boundary(eps: float, rho: float, basis: InvariantSphereBasis, profile: CatenoidProfile,
                   grid: QuotientDomainGrid, kappa: float = 30.0, tol: float = 1e-10,
                   max_iter: int = 40, delta: float = 0.0, nu: float | None = None,
                   dtn: DtNOperator | None = None, neck_operator: NeckOperator | None = None,
                   depth: int = 4, log=None) -> tuple:
    """Fixed point (g, h) joining the two families with matching values and slopes.

    The update C(g, h) is accelerated by Anderson mixing of the given depth
    (0 is the plain iteration).  Returns (state, neck_solution,
    outer_solution).  Raises DivergenceError when an iterate leaves the ball
    of radius kappa eps^(n-1).
    """
    n = basis.n
    if not 0 < eps < rho:
        raise ValidationError("eps must be < rho")
    dtn = dtn or dtn_operator(basis, rho, grid, nu)
    op = neck_operator or NeckOperator(basis, profile, eps, rho)
    K = len(basis)
    bound = kappa * eps ** (n - 1)
    state = MatchState(eps, np.zeros(K), np.zeros(K))
    mixer = Anderson(depth)
    v0 = None
    u0 = None
    neck = outer = None
    h_solved = None
    for it in range(1, max_iter + 1):
        neck = solve_neck_continued(state.h, h_solved, v0, eps, rho, basis, profile, delta, op)
        v0, h_solved = neck.v.coeffs, state.h
        W_cache = harmonic_extension_outer(state.g, grid, nu)
        outer = solve_outer_graph(state.g, eps, grid, nu, W=W_cache, u0=u0)
        u0 = outer.u
        dirichlet, neumann = _mismatch(neck, outer, basis, eps, profile.c_inf)
        Vn, dVn = neck.V_rho, neck.dV_rho
        dVo = outer.dV_sphere
        h_new = dtn.solve(dtn.B @ Vn + rho * (dVo - dVn))
        g_new = h_new + Vn
        step = basis.c2_norm(g_new - state.g) + basis.c2_norm(h_new - state.h)
        rec = dict(iteration=it, step=step, dirichlet=dirichlet, neumann=neumann,
                   g_norm=basis.c2_norm(g_new), h_norm=basis.c2_norm(h_new),
                   neck_iterations=neck.iterations, outer_iterations=len(outer.history))
        state.history.append(rec)
        if log is not None:
            log(rec)
        mixed = mixer.step(np.concatenate([state.g, state.h]), np.concatenate([g_new, h_new]))
        state.g, state.h, state.iteration = mixed[:K], mixed[K:], it
        if rec["g_norm"] > bound or rec["h_norm"] > bound:
            raise DivergenceError(
                f"iterate left the ball of radius kappa eps^(n-1) = {bound:.3e}", state.history)
        if step < tol:
            break
    else:
        raise DivergenceError("matching iteration did not converge", state.history)
    neck = solve_neck_continued(state.h, h_solved, v0, eps, rho, basis, profile, delta, op)
    outer = solve_outer_graph(state.g, eps, grid, nu, u0=u0)
    state.dirichlet, state.neumann = _mismatch(neck, outer, basis, eps, profile.c_inf)
    return state, neck, outer


# ---------------------------------------------------------------------- surface
def neck_spline(neck: NeckSolution) -> CubicSpline:
    """Cubic spline in s of the mode coefficients of w, even at s = 0."""
    w = neck.w
    return CubicSpline(w.s, w.coeffs, axis=1, bc_type=((1, np.zeros(len(w.coeffs))), "not-a-knot"))


def neck_immersion(neck: NeckSolution, profile: CatenoidProfile, basis: InvariantSphereBasis,
                   s, theta, spline=None) -> np.ndarray:
    """X_w(s, theta) = eps X_0 + phi^{(2-n)/2} w N for |s| <= s_eps, theta (..., n)."""
    n, eps = profile.n, neck.eps
    spline = spline or neck_spline(neck)
    s = np.asarray(s, dtype=float)
    theta = np.asarray(theta, dtype=float)
    ph = profile.phi(s)
    rad, xi = interpolating_normal(profile, s, neck.s_eps)
    om = ph ** ((2 - n) / 2.0)
    coeffs = np.moveaxis(spline(np.abs(s)), 0, -1)
    w = np.sum(coeffs * basis.eval_full(theta), axis=-1)
    radial = eps * ph + om * rad * w
    height = eps * profile.psi(s) + om * xi * w
    return np.concatenate([radial[..., None] * theta, height[..., None]], axis=-1)


@dataclass
class GluedSurface:
    n: int
    m: int
    eps: float
    rho: float
    lattice: Lattice
    basis: InvariantSphereBasis = field(repr=False)
    profile: CatenoidProfile = field(repr=False)
    state: MatchState = field(repr=False)
    neck: NeckSolution = field(repr=False)
    outer: OuterSolution = field(repr=False)
    operator: NeckOperator = field(repr=False)
    certificates: dict = field(default_factory=dict)
    c_eps: float = float("nan")
    d_eps: float = float("nan")

    def _neck_spline(self):
        return neck_spline(self.neck)

    def neck_point(self, s, theta, spline=None) -> np.ndarray:
        """X_w(s, theta) for 0 <= s <= s_eps, theta (..., n) on the unit sphere."""
        return neck_immersion(self.neck, self.profile, self.basis, s, theta, spline)

    def outer_height(self, U=None) -> np.ndarray:
        """Upper-sheet heights eps c_inf + u on the outer grid."""
        U = self.outer.u.values if U is None else U
        return self.eps * self.profile.c_inf + U


def neck_curvature_certificate(surface: GluedSurface, n_nodes: int = 48,
                               stencil: float = 2e-4, s_eval=None) -> float:
    """max |H| of the spline-interpolated neck at mid-cell s values (or ``s_eval``).

    The stencil is much finer than the grid, so the value measures the
    curvature of the interpolated continuous surface rather than the
    discrete equation that the solver satisfies.
    """
    basis, n = surface.basis, surface.n
    spline = surface._neck_spline()
    s = surface.neck.w.s
    mids = 0.5 * (s[:-1] + s[1:]) if s_eval is None else np.asarray(s_eval, dtype=float)
    mids = mids[(mids > 2 * stencil) & (mids < s[-1] - 2 * stencil)]
    theta = basis.full_points()
    if len(theta) > n_nodes:
        theta = theta[np.linspace(0, len(theta) - 1, n_nodes).astype(int)]
    frames = []
    for th in theta:
        Qm, _ = np.linalg.qr(np.column_stack([th, np.eye(n)]))
        frames.append(Qm[:, 1:n])
    frames = np.array(frames)

    def X(params):
        sp = params[..., 0]
        t = params[..., 1:]
        th = theta_b + np.einsum("...ab,...b->...a", frames_b, t)
        th = th / np.linalg.norm(th, axis=-1, keepdims=True)
        return surface.neck_point(sp, th, spline)

    S, Q = np.meshgrid(mids, np.arange(len(theta)), indexing="ij")
    theta_b = theta[Q][..., None, :]
    frames_b = frames[Q][..., None, :, :]
    params = np.concatenate([S[..., None], np.zeros(S.shape + (n - 1,))], axis=-1)
    rad, xi = interpolating_normal(surface.profile, S, surface.neck.s_eps)
    orient = np.concatenate([rad[..., None] * theta[Q],
                             xi[..., None]], axis=-1)
    H = mean_curvature_stencil(X, params, stencil, orient=orient)
    return float(np.max(np.abs(H)))


def outer_curvature_certificate(surface: GluedSurface) -> float:
    """max |H| of the outer graph from stencils of twice the grid spacing.

    H = (Lap u - Hess u(grad u, grad u)/W^2) / (n W), W = sqrt(1 + |grad u|^2),
    evaluated at nodes whose doubled stencil stays outside the ball.
    """
    H, ok = outer_curvature_field(surface)
    return float(np.max(np.abs(H[ok])))


def outer_curvature_field(surface: GluedSurface, reach: float | None = None) -> tuple:
    """Nodal H of the outer graph with the mask of trusted nodes.

    Nodes are trusted when their distance to the ball exceeds ``reach``
    (default: the extent of the doubled stencil) and they are not in the
    last two radial layers.
    """
    grid = surface.outer.u.grid
    U = surface.outer.u.values
    d = 1 + grid.m
    pad = np.pad(np.where(grid.inside, 0.0, U), [(2, 2)] * d, mode="reflect")
    shape = grid.shape
    core = tuple(slice(2, 2 + s) for s in shape)

    def sh(offs):
        return pad[tuple(slice(2 + o, 2 + o + s) for o, s in zip(offs, shape))]

    st = 2 * grid.steps
    G = np.zeros(shape + (d,))
    Hs = np.zeros(shape + (d, d))
    zero = [0] * d
    for a in range(d):
        e, f = list(zero), list(zero)
        e[a], f[a] = 2, -2
        G[..., a] = (sh(e) - sh(f)) / (2 * st[a])
        Hs[..., a, a] = (sh(e) - 2 * pad[core] + sh(f)) / st[a] ** 2
        for b in range(a + 1, d):
            acc = 0.0
            for sa in (2, -2):
                for sb in (2, -2):
                    o = list(zero)
                    o[a], o[b] = sa, sb
                    acc = acc + np.sign(sa * sb) * sh(o)
            Hs[..., a, b] = Hs[..., b, a] = acc / (4 * st[a] * st[b])
    r = grid.coords[..., 0]
    lap = np.trace(Hs, axis1=-2, axis2=-1)
    if grid.p > 1:
        with np.errstate(divide="ignore", invalid="ignore"):
            lap = lap + (grid.p - 1) * np.where(r > 0, G[..., 0] / np.where(r > 0, r, 1), Hs[..., 0, 0])
    W2 = 1 + np.sum(G**2, axis=-1)
    H = (lap - graph_nonlinearity(G, Hs)) / (grid.n * np.sqrt(W2))
    ok = ~grid.inside
    if reach is None:
        reach = 2 * math.sqrt(d) * grid.steps.max()
    ok &= grid.dist > grid.rho + reach
    ok[-2:] = False
    return H, ok


def symmetry_defect(surface: GluedSurface, samples: int = 64, seed: int = 0) -> float:
    """Max deviation of the neck samples under random elements of the symmetry group.

    The group acts by rotations of x1, sign changes of y and z -> -z; the
    lower half is defined by the reflection, so z -> -z maps samples exactly.
    """
    rng = np.random.default_rng(seed)
    n, m, p = surface.n, surface.m, surface.n - surface.m
    spline = surface._neck_spline()
    s = rng.uniform(0, surface.neck.s_eps, samples)
    th = rng.normal(size=(samples, n))
    th /= np.linalg.norm(th, axis=1, keepdims=True)
    X = surface.neck_point(s, th, spline)
    worst = 0.0
    for _ in range(8):
        R, _ = np.linalg.qr(rng.normal(size=(p, p)))
        sig = rng.choice([-1.0, 1.0], size=m)
        g = np.eye(n)
        g[:p, :p] = R
        g[p:, p:] = np.diag(sig)
        Xg = surface.neck_point(s, th @ g.T, spline)
        gX = np.concatenate([X[:, :n] @ g.T, X[:, n:]], axis=1)
        worst = max(worst, float(np.max(np.abs(Xg - gX))))
    # outer grid values are even by construction; check the mirrored interpolation rows
    U = surface.outer.u.values
    for axis in range(1, 1 + m):
        flipped = np.flip(U, axis=axis)
        lat_sym = np.nanmax(np.abs(np.take(U, [0], axis=axis) - np.take(flipped, [-1], axis=axis)))
        worst = max(worst, float(lat_sym))
    return worst


def assemble_surface(state: MatchState, neck: NeckSolution, outer: OuterSolution,
                     basis: InvariantSphereBasis, profile: CatenoidProfile, lattice: Lattice,
                     operator: NeckOperator) -> GluedSurface:
    """Collect the matched pieces and compute their certificates."""
    if not np.isfinite(state.dirichlet):
        raise AssemblyError("matching has not converged")
    surf = GluedSurface(n=basis.n, m=basis.m, eps=state.eps, rho=neck.rho, lattice=lattice,
                        basis=basis, profile=profile, state=state, neck=neck, outer=outer,
                        operator=operator)
    surf.c_eps, surf.d_eps = extract_end_data(surf)
    surf.certificates = dict(
        interface_c0=state.dirichlet,
        interface_c1=state.neumann,
        neck_residual=neck.residual,
        outer_residual=outer.residual,
        neck_curvature=neck_curvature_certificate(surf),
        outer_curvature=outer_curvature_certificate(surf),
        symmetry_defect=symmetry_defect(surf),
    )
    surf.certificates["mean_curvature"] = max(surf.certificates["neck_curvature"],
                                              surf.certificates["outer_curvature"])
    return surf


def refinement_study(coarse: GluedSurface, fine: GluedSurface) -> dict:
    """Mean-curvature residuals of two resolutions on a common evaluation set.

    The outer grids must be nested with an integer ratio k equal to the ratio
    of the neck steps.  Outer residuals are taken at the coarse trusted nodes,
    neck residuals at the coarse mid-cells; the observed order is
    log(res_coarse / res_fine) / log k.
    """
    gc, gf = coarse.outer.u.grid, fine.outer.u.grid
    ratios = (np.array(gf.shape) - 1) / (np.array(gc.shape) - 1)
    k = int(round(ratios[0]))
    if k < 2 or not np.allclose(ratios, k) or not math.isclose(gc.R1, gf.R1):
        raise ValidationError("the outer grids must be nested with one integer ratio")
    if not math.isclose(coarse.neck.w.step / fine.neck.w.step, k, rel_tol=0.05):
        raise ValidationError("neck and outer refinement ratios differ")
    reach = 2 * math.sqrt(1 + gc.m) * gc.steps.max()
    Hc, okc = outer_curvature_field(coarse, reach)
    Hf, okf = outer_curvature_field(fine, reach)
    sub = tuple(slice(None, None, k) for _ in gf.shape)
    Hf, okf = Hf[sub], okf[sub]
    mask = okc & okf
    s = coarse.neck.w.s
    mids = 0.5 * (s[:-1] + s[1:])
    res = []
    for surf, H in ((coarse, Hc), (fine, Hf)):
        outer = float(np.max(np.abs(H[mask])))
        neck = neck_curvature_certificate(surf, s_eval=mids)
        res.append(dict(neck=neck, outer=outer, total=max(neck, outer)))
    order = math.log(res[0]["total"] / res[1]["total"]) / math.log(k)
    return dict(ratio=k, coarse=res[0], fine=res[1], order=order,
                c_eps=[coarse.c_eps, fine.c_eps],
                c_eps_extrapolated=fine.c_eps + (fine.c_eps - coarse.c_eps) / (k * k - 1))


def extract_end_data(surface: GluedSurface, windows=((0.6, 0.8), (0.8, 1.0)),
                     rel_tol: float = 0.01) -> tuple:
    """(c_eps, d_eps) of the upper end z = c zeta(x1) + d from two tail windows."""
    field_u = surface.outer.u
    base = surface.eps * surface.profile.c_inf
    fits = [field_u.tail_fit(w) for w in windows]
    cs = [a for a, _ in fits]
    ds = [base + b for _, b in fits]
    p = surface.n - surface.m
    for vals in ((cs, ds) if p <= 2 else (ds,)):
        ref = max(abs(vals[1]), 1e-300)
        if abs(vals[0] - vals[1]) > rel_tol * ref:
            raise TailTooShortError(f"tail windows disagree: {vals[0]:.6g} vs {vals[1]:.6g}")
    c = cs[1] if p <= 2 else 0.0
    return float(c), float(ds[1])


# -------------------------------------------------------------------- balancing
def neck_flux(surface: GluedSurface | None = None, *, basis: InvariantSphereBasis | None = None,
              profile: CatenoidProfile | None = None, eps: float | None = None,
              s: float = 0.0, stencil: float = 1e-5) -> float:
    """Vertical flux of the neck through the cross-section at parameter s.

    The integrand is the vertical component of the unit conormal times the
    (n-1)-volume element of the cross-section.  With ``surface`` omitted the
    unperturbed eps-catenoid is used.
    """
    if surface is not None:
        basis, profile, eps = surface.basis, surface.profile, surface.eps
        spline = surface._neck_spline()
        X = lambda ss, th: surface.neck_point(ss, th, spline)  # noqa: E731
    else:
        def X(ss, th):
            ph = profile.phi(ss)[..., None]
            ps = profile.psi(ss)[..., None]
            return np.concatenate([eps * ph * th, eps * np.broadcast_to(ps, ph.shape)], axis=-1)
    n = basis.n
    theta = basis.full_points()
    total = 0.0
    for q, th in enumerate(theta):
        Qm, _ = np.linalg.qr(np.column_stack([th, np.eye(n)]))
        E = Qm[:, 1:n]

        def chart(t):
            v = th + E @ t
            return v / np.linalg.norm(v)

        Xs = (_signed(X, s + stencil, th) - _signed(X, s - stencil, th)) / (2 * stencil)
        Ts = []
        for k in range(n - 1):
            e = np.zeros(n - 1)
            e[k] = stencil
            Ts.append((X(np.array([s]), chart(e)[None])[0] - X(np.array([s]), chart(-e)[None])[0]) / (2 * stencil))
        T = np.array(Ts)
        g = T @ T.T
        Pt = T.T @ np.linalg.solve(g, T)
        eta = Xs - Pt @ Xs
        eta /= np.linalg.norm(eta)
        total += basis.weights[q] * eta[-1] * math.sqrt(np.linalg.det(g))
    return float(total)


def _signed(X, s: float, th) -> np.ndarray:
    """Point at signed parameter s; the lower half is the reflection z -> -z."""
    P = X(np.array([abs(s)]), th[None])[0].copy()
    if s < 0:
        P[-1] = -P[-1]
    return P


def outer_flux(surface: GluedSurface, i: int) -> float:
    """Vertical flux through the cross-section r1 = r_i of the upper sheet (both directions)."""
    grid = surface.outer.u.grid
    G, _ = grid.derivatives(surface.outer.u.values, surface.outer.u.data)
    dens = G[i, ..., 0] / np.sqrt(1 + np.sum(G[i] ** 2, axis=-1))
    w = np.ones(grid.face_shape)
    for a, Ml in enumerate(grid.M):
        wl = np.full(Ml + 1, grid.hy[a])
        wl[0] = wl[-1] = 0.5 * grid.hy[a]
        shape = [1] * grid.m
        shape[a] = Ml + 1
        w = w * wl.reshape(shape)
    p = grid.p
    r = grid.r[i]
    return float(2**grid.m * sphere_volume(p - 1) * r ** (p - 1) * np.sum(dens * w))


def balancing_check(surface: GluedSurface, heights=None) -> dict:
    """Vertical fluxes through cross-sections and the slope ratio c_eps / eps^(n-1).

    ``heights`` are z values on the upper sheet; each is converted to the
    cross-section r1 = const where the mean height of the graph equals it.
    Defaults to the heights at r1 = R1/2 and r1 = 0.9 R1.
    """
    n, m = surface.n, surface.m
    if m != n - 1:
        raise ValidationError("the balancing relation needs m = n - 1")
    grid = surface.outer.u.grid
    prof = surface.outer.u.mean_profile()
    z_mean = surface.eps * surface.profile.c_inf + prof
    valid = np.arange(grid.Nb + 1, grid.Nr - 1)
    if heights is None:
        idx = [valid[np.argmin(np.abs(grid.r[valid] - f * grid.R1))] for f in (0.5, 0.9)]
        heights = [float(z_mean[i]) for i in idx]
    rows = []
    for z0 in heights:
        zz = z_mean[valid]
        if not zz.min() <= z0 <= zz.max():
            raise GeometryError(f"height {z0} does not meet the meshed outer graph")
        i = int(valid[np.argmin(np.abs(zz - z0))])
        rows.append(dict(z0=float(z0), r1=float(grid.r[i]), flux=outer_flux(surface, i)))
    waist = neck_flux(surface)
    control = neck_flux(basis=surface.basis, profile=surface.profile, eps=surface.eps)
    vol_s = sphere_volume(n - 1)
    vol_t = lattice_volume(surface.lattice)
    c = surface.c_eps
    out = dict(
        heights=rows,
        waist_flux=waist,
        catenoid_flux=control,
        catenoid_flux_expected=surface.eps ** (n - 1) * vol_s,
        slope_ratio=c / surface.eps ** (n - 1),
        end_flux=2 * vol_t * c / math.sqrt(1 + c * c),
        flux_identity=vol_t * c / (surface.eps ** (n - 1) * vol_s),
    )
    fl = [r["flux"] for r in rows]
    out["height_spread"] = float((max(fl) - min(fl)) / max(abs(np.mean(fl)), 1e-300))
    return out


def glue(eps: float, basis: InvariantSphereBasis, profile: CatenoidProfile, lattice: Lattice,
         rho: float, grid: QuotientDomainGrid | None = None, dtn: DtNOperator | None = None,
         kappa: float = 30.0, tol: float = 1e-10, neck_step: float | None = None,
         nu: float | None = None, log=None) -> GluedSurface:
    """Match, assemble and certify the surface for one eps."""
    grid = grid or QuotientDomainGrid(basis, lattice, rho)
    dtn = dtn or dtn_operator(basis, rho, grid, nu)
    kw = {} if neck_step is None else dict(step=neck_step)
    op = NeckOperator(basis, profile, eps, rho, **kw)
    state, neck, outer = match_boundary(eps, rho, basis, profile, grid, kappa=kappa, tol=tol,
                                        dtn=dtn, neck_operator=op, nu=nu, log=log)
    return assemble_surface(state, neck, outer, basis, profile, lattice, op)
