"""Exterior problems on (R^{n-m} x T^m) minus the ball B^n_rho.

Invariant functions depend on r1 = |x1| and y in the quotient box
prod [0, a_l/2] of a rectangular torus, where the Laplacian becomes

    L = d^2/dr1^2 + (p-1)/r1 d/dr1 + sum_l d^2/dy_l^2,   p = n - m.

Discretization: a node grid with separate spacings in r1 and y.  Near the
ball (r1 <= r_Nb) the equations are solved in physical space with
Shortley-Weller stencils at the sphere.  Beyond r_Nb the domain is a product,
so the discrete problem decouples in the cosine modes of the y grid; each mode
is a tridiagonal radial problem, closed at r1 = R1 by its exact decaying
(or deficiency) behaviour.  The two parts are joined through the exact
discrete Dirichlet-to-Neumann block of the mode problems.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import integrate, special
from scipy.sparse.linalg import splu

from .errors import (ConvergenceError, DivergenceError, InputSizeError, SymmetryError,
                     ValidationError)
from .lattice import Lattice
from .sphere import InvariantSphereBasis


def nu_range(n: int, m: int) -> tuple:
    """Admissible open interval for the weight nu of the graph problem."""
    if m <= n - 3:
        return (2.0 + m - n, 0.0)
    if m == n - 2:
        return (-2.0, 0.0)
    return (-math.inf, 0.0)


def default_nu(n: int, m: int) -> float:
    return -1.0 if m >= n - 2 else (2.0 + m - n) / 2.0


def check_nu(n: int, m: int, nu: float) -> None:
    lo, hi = nu_range(n, m)
    if not lo < nu < hi:
        raise ValidationError(f"nu = {nu} outside ({lo}, {hi}) for n={n}, m={m}")


def zeta(p: int, r) -> np.ndarray:
    """Deficiency profile: r for p = 1, log r for p = 2, 0 otherwise."""
    r = np.asarray(r, dtype=float)
    if p == 1:
        return r
    if p == 2:
        return np.log(r)
    return np.zeros_like(r)


def _thomas(a, b, c, d):
    """Batched tridiagonal solve along axis 0 (a: sub, b: diag, c: super)."""
    n = b.shape[0]
    cp = np.empty_like(b)
    dp = np.empty_like(d)
    cp[0] = c[0] / b[0]
    dp[0] = d[0] / b[0]
    for i in range(1, n):
        den = b[i] - a[i] * cp[i - 1]
        cp[i] = c[i] / den
        dp[i] = (d[i] - a[i] * dp[i - 1]) / den
    x = np.empty_like(d)
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


def _quadratic_design(z):
    """Rows [1, z_a, z_a z_b (a <= b)] for local coordinates z (N, d)."""
    d = z.shape[1]
    cols = [np.ones(len(z))] + [z[:, a] for a in range(d)]
    for a in range(d):
        for b in range(a, d):
            cols.append(z[:, a] * z[:, b])
    return np.column_stack(cols)


class QuotientDomainGrid:
    """Node grid on [0, R1] x prod [0, a_l/2] outside the ball of radius rho.

    Parameters
    ----------
    basis : InvariantSphereBasis
        Supplies the boundary modes and the sphere nodes used for matching.
    lattice : Lattice
        Rectangular lattice of T^m.
    rho : float
        Ball radius, below half of the smallest period.
    R1 : float, optional
        Radial truncation; 8 rho for m = n-1 and 40 rho otherwise.
    h : float, optional
        Target spacing, rho/8 by default.
    """

    def __init__(self, basis: InvariantSphereBasis, lattice: Lattice, rho: float,
                 R1: float | None = None, h: float | None = None):
        n, m = basis.n, basis.m
        if lattice.m != m:
            raise ValidationError("lattice dimension differs from m")
        if not lattice.is_diagonal:
            raise SymmetryError("the exterior solver needs a rectangular lattice")
        self.basis, self.lattice = basis, lattice
        self.n, self.m, self.p = n, m, n - m
        a = lattice.periods
        if not 0 < rho < 0.5 * a.min():
            raise ValidationError(f"rho = {rho} must lie in (0, {0.5 * a.min():.4g})")
        self.rho = float(rho)
        if R1 is None:
            R1 = 8 * rho if m == n - 1 else 40 * rho
        h = rho / 8.0 if h is None else float(h)
        self.Nr = int(math.ceil(R1 / h - 1e-9))
        self.hr = R1 / self.Nr
        self.R1 = float(R1)
        if self.p == 2 and self.R1 <= 1.0:
            raise ValidationError("R1 must exceed 1 for the logarithmic deficiency")
        self.M = np.array([max(int(round(0.5 * al / h)), 2) for al in a])
        self.hy = 0.5 * a / self.M
        self.r = np.arange(self.Nr + 1) * self.hr
        self.y = [np.arange(Ml + 1) * hl for Ml, hl in zip(self.M, self.hy)]
        self.steps = np.concatenate([[self.hr], self.hy])
        self.Nb = int(math.ceil(rho / self.hr)) + 3
        if self.Nb >= self.Nr - 2:
            raise ValidationError("R1 too small compared with rho")
        self.shape = (self.Nr + 1,) + tuple(int(Ml) + 1 for Ml in self.M)
        self.face_shape = self.shape[1:]
        self.nface = int(np.prod(self.face_shape))
        mesh = np.meshgrid(self.r, *self.y, indexing="ij")
        self.coords = np.stack(mesh, axis=-1)
        self.dist = np.linalg.norm(self.coords, axis=-1)
        self.inside = self.dist <= rho * (1 + 1e-12)
        self._setup_modes()
        self._assemble()
        self._setup_normal_derivative()
        self._setup_derivatives()

    # ------------------------------------------------------------------ modes
    def _setup_modes(self):
        Vs, Vinvs, mus = [], [], []
        for Ml, hl in zip(self.M, self.hy):
            j = np.arange(Ml + 1)
            V = np.cos(np.pi * np.outer(j, j) / Ml)
            Vs.append(V)
            Vinvs.append(np.linalg.inv(V))
            mus.append((2 - 2 * np.cos(np.pi * j / Ml)) / hl**2)
        V = Vs[0]
        Vinv = Vinvs[0]
        for Vl, Wl in zip(Vs[1:], Vinvs[1:]):
            V = np.kron(V, Vl)
            Vinv = np.kron(Vinv, Wl)
        self.V, self.Vinv = V, Vinv
        mu = mus[0]
        for ml in mus[1:]:
            mu = np.add.outer(mu, ml).ravel()
        self.mu = np.asarray(mu).ravel()
        mu[np.abs(mu) < 1e-14] = 0.0

        # outer radial rows i = Nb+1 .. Nr for every mode
        p, h = self.p, self.hr
        ri = self.r[self.Nb + 1:]
        no = ri.size
        K = self.nface
        A = np.broadcast_to((1 / h**2 - (p - 1) / (2 * ri * h))[:, None], (no, K)).copy()
        B = (-2 / h**2 - self.mu[None, :]) * np.ones((no, 1))
        C = np.broadcast_to((1 / h**2 + (p - 1) / (2 * ri * h))[:, None], (no, K)).copy()
        R1 = self.R1
        if p == 1:
            q = 2 + h**2 * self.mu
            lam = np.where(self.mu > 0, 0.5 * (q - np.sqrt(np.clip(q**2 - 4, 0, None))), (R1 + h) / R1)
            self.ghost_factor = lam
            B[-1] += C[-1] * lam
        else:
            tau = np.empty(K)
            pos = self.mu > 0
            nu_b = p / 2.0 - 1.0
            z = np.sqrt(self.mu[pos]) * R1
            tau[pos] = -np.sqrt(self.mu[pos]) * special.kve(nu_b + 1, z) / special.kve(nu_b, z)
            tau[~pos] = 1.0 / (R1 * math.log(R1)) if p == 2 else (2.0 - p) / R1
            self.tau = tau
            A[-1] += C[-1]
            B[-1] += C[-1] * 2 * h * tau
        C[-1] = 0.0
        self._ABC = (A, B, C)
        rhs = np.zeros((no, K))
        rhs[0] = -A[0]
        A0 = A.copy()
        A0[0] = 0.0
        self._A0 = A0
        self.phi_hom = _thomas(A0, B, C, rhs)  # homogeneous profiles, 1 at r_Nb
        self.alpha = self.phi_hom[0]
        self.D = (self.V * self.alpha[None, :]) @ self.Vinv

    def to_modes(self, face_values) -> np.ndarray:
        """Cosine-mode coefficients of face arrays (..., *face_shape)."""
        lead = face_values.shape[: face_values.ndim - self.m]
        return face_values.reshape(lead + (self.nface,)) @ self.Vinv.T

    def from_modes(self, coeffs) -> np.ndarray:
        lead = coeffs.shape[:-1]
        return (coeffs @ self.V.T).reshape(lead + self.face_shape)

    def _outer_particular(self, f_hat):
        """Mode solutions on rows Nb+1..Nr with zero value at r_Nb."""
        A, B, C = self._ABC
        return _thomas(self._A0, B, C, f_hat)

    # --------------------------------------------------------------- assembly
    def _neighbor(self, idx, axis, sgn):
        """Mirror-resolved neighbor index and geometric position."""
        pos = self.coords[idx].copy()
        pos[axis] += sgn * self.steps[axis]
        j = list(idx)
        j[axis] += sgn
        if j[axis] < 0:
            j[axis] = -j[axis]
        elif axis > 0 and j[axis] > self.M[axis - 1]:
            j[axis] = 2 * self.M[axis - 1] - j[axis]
        return tuple(j), pos

    def _crossing(self, x, axis, sgn):
        """Distance t in (0, h] from x to the sphere along sgn * e_axis."""
        b = sgn * x[axis]
        c = float(x @ x) - self.rho**2
        disc = max(b * b - c, 0.0)
        t = -b - math.sqrt(disc)
        if t <= 0:
            t = -b + math.sqrt(disc)
        return t

    def _assemble(self):
        p = self.p
        slab = np.zeros(self.shape, dtype=bool)
        slab[: self.Nb + 1] = True
        slab &= ~self.inside
        self.slab_mask = slab
        ids = -np.ones(self.shape, dtype=np.int64)
        ids[slab] = np.arange(slab.sum())
        self.ids = ids
        self.nunk = int(slab.sum())
        rows, cols, vals = [], [], []
        brow, bpts, bval = [], [], []
        iface_rows, iface_coef = [], []
        self.nodes = np.argwhere(slab)
        for node in self.nodes:
            idx = tuple(node)
            row = ids[idx]
            x = self.coords[idx]
            diag = 0.0
            for axis in range(1 + self.m):
                h = self.steps[axis]
                nb = {}
                for sgn in (-1, 1):
                    j, pos = self._neighbor(idx, axis, sgn)
                    if axis == 0 and sgn == 1 and idx[0] == self.Nb:
                        nb[sgn] = ("iface", h, None)
                    elif np.linalg.norm(pos) <= self.rho * (1 + 1e-12):
                        t = self._crossing(x, axis, sgn)
                        P = x.copy()
                        P[axis] += sgn * t
                        nb[sgn] = ("bdry", t, P)
                    else:
                        nb[sgn] = ("node", h, j)
                hm, hp = nb[-1][1], nb[1][1]
                if axis == 0 and idx[0] == 0:
                    cm = cp = p / h**2
                    c0 = -2 * p / h**2
                else:
                    cm = 2.0 / (hm * (hm + hp))
                    cp = 2.0 / (hp * (hm + hp))
                    c0 = -2.0 / (hm * hp)
                    if axis == 0 and p > 1:
                        k = (p - 1) / x[0]
                        cm += -k * hp / (hm * (hm + hp))
                        cp += k * hm / (hp * (hm + hp))
                        c0 += k * (hp - hm) / (hm * hp)
                diag += c0
                for sgn, coef in ((-1, cm), (1, cp)):
                    kind, _, extra = nb[sgn]
                    if kind == "node":
                        rows.append(row)
                        cols.append(ids[extra])
                        vals.append(coef)
                    elif kind == "bdry":
                        brow.append(row)
                        bpts.append(extra)
                        bval.append(coef)
                    else:
                        iface_rows.append(row)
                        iface_coef.append(coef)
            rows.append(row)
            cols.append(row)
            vals.append(diag)
        if np.any(cols and np.min(cols) < 0):
            raise ValidationError("stencil references a node outside the slab")
        A = sp.coo_matrix((vals, (rows, cols)), shape=(self.nunk, self.nunk)).tocsr()
        # interface: u(r_{Nb+1}, .) = D u(r_Nb, .) + V beta
        face_ids = ids[self.Nb].ravel()
        self.face_ids = face_ids
        iface_rows = np.array(iface_rows)
        iface_coef = np.array(iface_coef)
        order = np.argsort(iface_rows)
        iface_rows, iface_coef = iface_rows[order], iface_coef[order]
        if not np.array_equal(iface_rows, face_ids):
            raise ValidationError("interface layer intersects the ball")
        dense = sp.csr_matrix(iface_coef[:, None] * self.D)
        Pmat = sp.coo_matrix((np.ones(self.nface), (face_ids, np.arange(self.nface))),
                             shape=(self.nunk, self.nface)).tocsr()
        self.iface_coef = iface_coef
        self.A = (A + Pmat @ dense @ Pmat.T).tocsc()
        self.face_P = Pmat
        self.lu = splu(self.A)
        bpts = np.array(bpts).reshape(-1, 1 + self.m)
        E = self.basis.eval_reduced(np.abs(bpts) / self.rho) if len(bpts) else np.zeros((0, len(self.basis)))
        self.bc_matrix = sp.csr_matrix(
            sp.coo_matrix((bval, (brow, np.arange(len(brow)))), shape=(self.nunk, len(brow)))
            @ sp.csr_matrix(E))

    # ---------------------------------------------------------- MLS operators
    @staticmethod
    def _offsets(d, span):
        rng = np.arange(-span, span + 1)
        return np.stack(np.meshgrid(*([rng] * d), indexing="ij"), axis=-1).reshape(-1, d)

    def _mls_rows(self, center, radius, n_sphere=None, exclude_inside=True):
        """Quadratic least-squares fit around ``center``.

        Returns (node_ids, node_weights, sphere_points, sphere_weights) where
        weights map samples to [value, gradient, hessian(a<=b)] at the center.
        """
        d = 1 + self.m
        steps = self.steps
        base = np.floor(center / steps).astype(int)
        span = int(math.ceil(radius / steps.min())) + 1
        offs = self._offsets(d, span)
        j = base + offs
        pos = j * steps
        keep = (np.linalg.norm(pos - center, axis=1) <= radius) & \
            (np.linalg.norm(pos, axis=1) > self.rho * (1 + 1e-12))
        j, pos = j[keep], pos[keep]
        jj = np.abs(j)
        for axis in range(1, d):
            Ml = self.M[axis - 1]
            jj[:, axis] = np.where(jj[:, axis] > Ml, 2 * Ml - jj[:, axis], jj[:, axis])
        ok = jj[:, 0] <= self.Nr
        jj, pts = jj[ok], pos[ok]
        pid = self.ids[tuple(jj.T)]
        if np.any(pid < 0):
            raise ValidationError("MLS stencil leaves the slab; increase Nb")
        # sphere points near the radial projection of the center
        c = center / np.linalg.norm(center) * self.rho
        Qm, _ = np.linalg.qr(np.column_stack([c, np.eye(d)]))
        tang = Qm[:, 1:d]
        hs = steps.max()
        sph = [c]
        for k in range(d - 1):
            for s in (-1.0, 1.0):
                for fac in (1.0, 2.0):
                    q = c + s * fac * hs * tang[:, k]
                    sph.append(q / np.linalg.norm(q) * self.rho)
        for k in range(d - 1):
            for k2 in range(k + 1, d - 1):
                for s1, s2 in itertools.product((-1.0, 1.0), repeat=2):
                    q = c + hs * (s1 * tang[:, k] + s2 * tang[:, k2])
                    sph.append(q / np.linalg.norm(q) * self.rho)
        sph = np.array(sph)
        allp = np.vstack([pts, sph]) - center
        Phi = _quadratic_design(allp / hs)
        w = 1.0 / (1.0 + np.sum((allp / hs) ** 2, axis=1))
        w[len(pts):] *= 4.0
        WPhi = Phi * w[:, None]
        coef = np.linalg.lstsq(WPhi.T @ Phi, WPhi.T, rcond=None)[0]
        # undo the 1/hs scaling: gradient / hs, hessian / hs^2 (off-diagonal terms count once)
        scale = [1.0] + [1.0 / hs] * d
        for a in range(d):
            for b in range(a, d):
                scale.append((2.0 if a == b else 1.0) / hs**2)
        coef = coef * np.array(scale)[:, None]
        return pid, coef[:, : len(pts)], sph, coef[:, len(pts):]

    def _setup_normal_derivative(self):
        """Linear map (u slab values, boundary coefficients) -> d_r u at sphere nodes."""
        d = 1 + self.m
        P = self.rho * self.basis.reduced
        Q = P.shape[0]
        rows, cols, vals = [], [], []
        Gb = np.zeros((Q, len(self.basis)))
        radius = 2.3 * self.steps.max()
        for q in range(Q):
            pid, cn, sph, cs = self._mls_rows(P[q], radius)
            nrm = P[q] / self.rho
            wn = nrm @ cn[1:1 + d]
            ws = nrm @ cs[1:1 + d]
            rows.extend([q] * len(pid))
            cols.extend(pid)
            vals.extend(wn)
            Gb[q] = ws @ self.basis.eval_reduced(np.abs(sph) / self.rho)
        self.dn_u = sp.coo_matrix((vals, (rows, cols)), shape=(Q, self.nunk)).tocsr()
        self.dn_b = Gb

    def normal_derivative(self, field: "OuterField") -> np.ndarray:
        """Radial derivative at the sphere quadrature nodes."""
        u = field.values[self.slab_mask]
        return self.dn_u @ u + self.dn_b @ field.data

    def _setup_derivatives(self):
        """Gradient/Hessian operators: central differences, MLS next to the ball."""
        d = 1 + self.m
        ext = ~self.inside
        near = np.zeros(self.shape, dtype=bool)
        for off in itertools.product((-1, 0, 1), repeat=d):
            pos = self.coords + np.array(off) * self.steps
            near |= np.linalg.norm(pos, axis=-1) <= self.rho * (1 + 1e-12)
        near &= ext
        self.near_mask = near
        nodes = np.argwhere(near)
        nq = 1 + d + d * (d + 1) // 2
        rows, cols, vals = [], [], []
        Bq = np.zeros((len(nodes), nq, len(self.basis)))
        radius = 2.3 * self.steps.max()
        for k, node in enumerate(nodes):
            x = self.coords[tuple(node)]
            pid, cn, sph, cs = self._mls_rows(x, radius)
            for qq in range(nq):
                rows.extend([k * nq + qq] * len(pid))
                cols.extend(pid)
                vals.extend(cn[qq])
            Bq[k] = cs @ self.basis.eval_reduced(np.abs(sph) / self.rho)
        self.near_nodes = nodes
        self.near_u = sp.coo_matrix((vals, (rows, cols)), shape=(len(nodes) * nq, self.nunk)).tocsr()
        self.near_b = Bq

    # -------------------------------------------------------------- evaluation
    def padded(self, U):
        """Values with one mirrored ghost layer on every side; far ghost from the mode closure."""
        d = 1 + self.m
        pad = np.pad(U, [(1, 1)] * d, mode="reflect")
        # far ghost at r1 = R1 + h from the exact closure of each mode
        uh = self.to_modes(U[-1])
        if self.p == 1:
            gh = uh * self.ghost_factor
        else:
            gh = self.to_modes(U[-2]) + 2 * self.hr * self.tau * uh
        ghost = self.from_modes(gh)
        sl = (slice(-1, None),) + tuple(slice(1, -1) for _ in range(self.m))
        pad[sl] = ghost[None]
        return pad

    def derivatives(self, U, data) -> tuple:
        """Reduced gradient (..., d) and Hessian (..., d, d) at every node.

        ``U`` is the full value array (anything inside the ball is ignored) and
        ``data`` the sphere Dirichlet coefficients.
        """
        d = 1 + self.m
        Uf = np.where(self.inside, 0.0, U)
        pad = self.padded(Uf)
        G = np.zeros(self.shape + (d,))
        H = np.zeros(self.shape + (d, d))
        core = tuple(slice(1, -1) for _ in range(d))

        def sh(offs):
            return pad[tuple(slice(1 + o, pad.shape[a] - 1 + o) for a, o in enumerate(offs))]

        zero = [0] * d
        for a in range(d):
            e = list(zero)
            e[a] = 1
            f = list(zero)
            f[a] = -1
            G[..., a] = (sh(e) - sh(f)) / (2 * self.steps[a])
            H[..., a, a] = (sh(e) - 2 * pad[core] + sh(f)) / self.steps[a] ** 2
            for b in range(a + 1, d):
                acc = 0.0
                for sa, sb in itertools.product((1, -1), repeat=2):
                    o = list(zero)
                    o[a], o[b] = sa, sb
                    acc = acc + sa * sb * sh(o)
                H[..., a, b] = H[..., b, a] = acc / (4 * self.steps[a] * self.steps[b])
        if len(self.near_nodes):
            nq = 1 + d + d * (d + 1) // 2
            vals = (self.near_u @ U[self.slab_mask]).reshape(-1, nq)
            vals = vals + np.einsum("kqj,j->kq", self.near_b, data)
            idx = tuple(self.near_nodes.T)
            G[idx] = vals[:, 1:1 + d]
            col = 1 + d
            for a in range(d):
                for b in range(a, d):
                    H[idx + (a, b)] = vals[:, col]
                    H[idx + (b, a)] = vals[:, col]
                    col += 1
        G[self.inside] = np.nan
        H[self.inside] = np.nan
        return G, H

    def laplacian(self, U, data) -> np.ndarray:
        """Discrete operator at every exterior node (slab stencils, mode rows outside)."""
        out = np.full(self.shape, np.nan)
        u = U[self.slab_mask]
        face_next = self.from_modes(self.to_modes(U[self.Nb + 1]))
        Au = self.A @ u + self.bc_matrix @ data
        # the assembled interface rows use D u_Nb; replace with the actual next layer
        Au[self.face_ids] += self.iface_coef * (face_next.ravel() - (self.D @ U[self.Nb].ravel()))
        out[self.slab_mask] = Au
        # outer rows in physical space via the radial three-point stencil
        pad = self.padded(np.where(self.inside, 0.0, U))
        d = 1 + self.m
        p, h = self.p, self.hr
        core = pad[tuple(slice(1, -1) for _ in range(d))]
        up = pad[(slice(2, None),) + tuple(slice(1, -1) for _ in range(self.m))]
        um = pad[(slice(0, -2),) + tuple(slice(1, -1) for _ in range(self.m))]
        r = self.r.reshape((-1,) + (1,) * self.m)
        with np.errstate(divide="ignore", invalid="ignore"):
            L = (up - 2 * core + um) / h**2 + (p - 1) / r * (up - um) / (2 * h)
        for a in range(self.m):
            e = [slice(1, -1)] * d
            f = [slice(1, -1)] * d
            e[a + 1] = slice(2, None)
            f[a + 1] = slice(0, -2)
            L = L + (pad[tuple(e)] - 2 * core + pad[tuple(f)]) / self.hy[a] ** 2
        out[self.Nb + 1:] = L[self.Nb + 1:]
        return out

    def sphere_points(self) -> np.ndarray:
        return self.rho * self.basis.reduced


@dataclass
class OuterField:
    grid: QuotientDomainGrid = field(repr=False)
    values: np.ndarray = field(repr=False)  # full grid, nan inside the ball
    data: np.ndarray = field(repr=False)    # sphere Dirichlet coefficients
    nu: float = -1.0
    deficiency: tuple = (0.0, 0.0)

    def mean_profile(self) -> np.ndarray:
        """Torus average of the field on each layer r1 = r_i (outer layers only exact)."""
        g = self.grid
        ax = tuple(range(1, 1 + g.m))
        w = np.ones(g.face_shape)
        for a, Ml in enumerate(g.M):
            wl = np.ones(Ml + 1)
            wl[0] = wl[-1] = 0.5
            shape = [1] * g.m
            shape[a] = Ml + 1
            w = w * wl.reshape(shape)
        w = w / w.sum()
        vals = np.where(g.inside, np.nan, self.values)
        return np.sum(vals * w, axis=ax)

    def tail_fit(self, window) -> tuple:
        g = self.grid
        lo, hi = window
        sel = (g.r >= lo * g.R1 - 1e-12) & (g.r <= hi * g.R1 + 1e-12)
        u0 = self.mean_profile()[sel]
        r = g.r[sel]
        if g.p <= 2:
            A = np.column_stack([zeta(g.p, r), np.ones_like(r)])
            (a, b), *_ = np.linalg.lstsq(A, u0, rcond=None)
        else:
            a, b = 0.0, float(np.mean(u0))
        return float(a), float(b)

    def weighted_norm(self) -> float:
        """sup (1 + r1)^{-nu} |w| after removing the deficiency part."""
        g = self.grid
        a, b = self.deficiency
        r = g.coords[..., 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            z = zeta(g.p, np.maximum(r, 1e-300)) if g.p <= 2 else 0.0
        rem = self.values - (a * z + b) * (r >= 2.0)
        return float(np.nanmax(np.abs(rem) * (1 + r) ** (-self.nu)))


def _deficiency(field: OuterField) -> tuple:
    return field.tail_fit((0.8, 1.0))


def laplace_exterior_solve(f, data, grid: QuotientDomainGrid, nu: float | None = None) -> OuterField:
    """Solve L w = f outside the ball with w = data on the sphere.

    ``f`` is an array on the full grid (values inside the ball ignored) or
    None; ``data`` are sphere-mode coefficients.  The far field is the exact
    decaying closure of every torus mode plus the deficiency element of the
    mean mode (r1 for m = n-1, log r1 for m = n-2).
    """
    n, m = grid.n, grid.m
    nu = default_nu(n, m) if nu is None else nu
    check_nu(n, m, nu)
    data = np.asarray(data, dtype=float)
    if data.shape != (len(grid.basis),):
        raise ValidationError("boundary data must be sphere-mode coefficients")
    F = np.zeros(grid.shape) if f is None else np.where(grid.inside, 0.0, np.asarray(f, dtype=float))
    if not np.all(np.isfinite(F)):
        raise ValidationError("source has non-finite values")
    f_hat = grid.to_modes(F[grid.Nb + 1:])
    part = grid._outer_particular(f_hat)
    beta_face = grid.from_modes(part[0]).ravel()
    rhs = F[grid.slab_mask] - grid.bc_matrix @ data
    rhs[grid.face_ids] -= grid.iface_coef * beta_face
    u = grid.lu.solve(rhs)
    if not np.all(np.isfinite(u)):
        raise ConvergenceError("exterior linear solve failed")
    U = np.full(grid.shape, np.nan)
    U[grid.slab_mask] = u
    u_nb_hat = grid.to_modes(U[grid.Nb])
    outer_hat = part + grid.phi_hom * u_nb_hat[None, :]
    U[grid.Nb + 1:] = grid.from_modes(outer_hat)
    out = OuterField(grid, U, data, nu)
    out.deficiency = _deficiency(out)
    return out


def harmonic_extension_outer(h, grid: QuotientDomainGrid, nu: float | None = None) -> OuterField:
    """Bounded-growth harmonic function outside the ball equal to h on the sphere."""
    return laplace_exterior_solve(None, h, grid, nu)


@dataclass(frozen=True)
class BallHarmonic:
    """W_h = sum h_l (r/rho)^l e_l inside the ball."""

    h: np.ndarray
    rho: float
    basis: InvariantSphereBasis = field(repr=False)

    def radial_profiles(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return self.h[:, None] * (r[None, :] / self.rho) ** self.basis.degrees[:, None]

    def __call__(self, x) -> np.ndarray:
        """Evaluate at reduced points (..., 1+m) with |x| <= rho."""
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        theta = np.where(r[..., None] > 0, np.abs(x) / np.where(r > 0, r, 1.0)[..., None], 0.0)
        E = self.basis.eval_reduced(theta)
        fac = (r[..., None] / self.rho) ** self.basis.degrees
        return np.sum(self.h * fac * E, axis=-1)

    def radial_derivative_at_rho(self) -> np.ndarray:
        """Mode coefficients of d_r W_h on r = rho: (l / rho) h_l."""
        return self.basis.degrees * self.h / self.rho


def ball_harmonic_extension(h, rho: float, basis: InvariantSphereBasis) -> BallHarmonic:
    return BallHarmonic(np.asarray(h, dtype=float), float(rho), basis)


def graph_nonlinearity(G, H) -> np.ndarray:
    """Hess u (grad u, grad u) / (1 + |grad u|^2); minimal graphs have Lap u equal to it."""
    num = np.einsum("...a,...ab,...b->...", G, H, G)
    return num / (1.0 + np.sum(G**2, axis=-1))


def graph_residual(field: OuterField) -> np.ndarray:
    """Discrete minimal-graph residual L_h u - Hess u(grad u, grad u)/(1+|grad u|^2)."""
    g = field.grid
    G, H = g.derivatives(field.values, field.data)
    return g.laplacian(field.values, field.data) - graph_nonlinearity(G, H)


@dataclass
class OuterSolution:
    g: np.ndarray
    eps: float
    u: OuterField = field(repr=False)
    W: OuterField = field(repr=False)
    history: list = field(default_factory=list)
    residual: float = 0.0
    slope: float = 0.0
    offset: float = 0.0
    du_sphere: np.ndarray = field(default=None, repr=False)   # modes of d_r u on the sphere
    dW_sphere: np.ndarray = field(default=None, repr=False)   # modes of d_r W_g on the sphere

    @property
    def V_hat(self) -> np.ndarray:
        """V^_g = -u - W^_g on the grid (nan inside the ball)."""
        return -self.u.values - self.W.values

    @property
    def dV_sphere(self) -> np.ndarray:
        return -self.du_sphere - self.dW_sphere


def annulus_mask(grid: QuotientDomainGrid) -> np.ndarray:
    return (~grid.inside) & (grid.dist <= 2 * grid.rho)


def outer_V_norm(grid: QuotientDomainGrid, V, dV_sphere) -> float:
    """sup of |V| on rho <= r <= 2 rho plus sup of |d_r V| on the sphere."""
    sup = float(np.max(np.abs(V[annulus_mask(grid)])))
    return sup + grid.basis.sup_norm(dV_sphere)


def solve_outer_graph(g, eps: float, grid: QuotientDomainGrid, nu: float | None = None,
                      kappa: float | None = None, tol: float = 1e-12, max_iter: int = 50,
                      W: OuterField | None = None, u0: OuterField | None = None) -> OuterSolution:
    """Minimal graph u outside the ball with u = -g on the sphere.

    Picard iteration u <- G(N(u)) where N(u) = Hess u(grad u, grad u)/(1+|grad u|^2)
    and G is :func:`laplace_exterior_solve` with data -g.
    """
    basis = grid.basis
    n = grid.n
    g = np.asarray(g, dtype=float)
    if kappa is not None and basis.c2_norm(g) > kappa * eps ** (n - 1) * (1 + 1e-12):
        raise InputSizeError(
            f"|g| = {basis.c2_norm(g):.3e} exceeds kappa eps^(n-1) = {kappa * eps ** (n - 1):.3e}")
    if W is None:
        W = harmonic_extension_outer(g, grid, nu)
    u = W.values * -1.0 if u0 is None else u0.values
    field_u = OuterField(grid, u, -g, W.nu)
    history = []
    for _ in range(max_iter):
        Gd, Hd = grid.derivatives(field_u.values, field_u.data)
        src = graph_nonlinearity(Gd, Hd)
        new = laplace_exterior_solve(src, -g, grid, W.nu)
        diff = float(np.nanmax(np.abs(new.values - field_u.values)))
        history.append(diff)
        field_u = new
        if not np.isfinite(diff) or (len(history) > 3 and diff > 2 * history[0] and diff > 1e-8):
            raise DivergenceError("Picard iteration for the graph equation diverges", history)
        if diff < tol:
            break
    res = graph_residual(field_u)
    proj = basis.project
    du = proj(grid.normal_derivative(field_u))
    dW = proj(grid.normal_derivative(W))
    a, b = field_u.deficiency
    return OuterSolution(g=g, eps=eps, u=field_u, W=W, history=history,
                         residual=float(np.nanmax(np.abs(res))), slope=a, offset=b,
                         du_sphere=du, dW_sphere=dW)


def outer_lipschitz_probe(g1, g2, eps: float, grid: QuotientDomainGrid,
                          nu: float | None = None) -> float:
    """|V^_{g2} - V^_{g1}| / |g2 - g1| with :func:`outer_V_norm` and the boundary norm."""
    basis = grid.basis
    g1 = np.asarray(g1, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    dg = basis.c2_norm(g2 - g1)
    if dg == 0.0:
        return 0.0
    a = solve_outer_graph(g1, eps, grid, nu)
    b = solve_outer_graph(g2, eps, grid, nu)
    return outer_V_norm(grid, b.V_hat - a.V_hat, b.dV_sphere - a.dV_sphere) / dg


# ---------------------------------------------------------------- radial problems
def radial_green(f, r, p: int, r_inf: float = np.inf) -> np.ndarray:
    """Regular solution of w'' + (p-1)/r w' = f by the nested radial integral.

    w0(r) = int_r^inf z^{1-p} int_z^inf t^{p-1} f(t) dt dz, corrected by the
    multiple of the deficiency element that makes w smooth at r = 0:
    + F(0) r for p = 1, + F(0) log r for p = 2, + F(0) r^{2-p}/(2-p) for p >= 3,
    with F(0) = int_0^inf t^{p-1} f dt.  Evaluated with adaptive quadrature.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=200)

    def F(z):
        return integrate.quad(lambda t: t ** (p - 1) * f(t), z, r_inf, **opts)[0]

    F0 = F(0.0)
    out = np.empty_like(r)
    for i, ri in enumerate(r):
        w0 = integrate.quad(lambda z: z ** (1 - p) * F(z), ri, r_inf, **opts)[0]
        if p == 1:
            corr = F0 * ri
        elif p == 2:
            corr = F0 * math.log(ri)
        else:
            corr = F0 * ri ** (2 - p) / (2 - p)
        out[i] = w0 + corr
    return out


def radial_fd_solve(f, p: int, R: float, h: float) -> tuple:
    """Second-order FD solve of the mean-mode problem on [0, R].

    Regular at r = 0 and closed at R by the deficiency behaviour of the
    harmonic mean mode (w' = w/R for p = 1, w' = w/(R log R) for p = 2,
    w' = (2-p) w / R for p >= 3).  Returns (r, w).
    """
    N = int(math.ceil(R / h))
    hh = R / N
    r = np.arange(N + 1) * hh
    fv = np.asarray(f(r), dtype=float)
    a = np.zeros(N + 1)
    b = np.zeros(N + 1)
    c = np.zeros(N + 1)
    b[0] = -2 * p / hh**2
    c[0] = 2 * p / hh**2
    ri = r[1:]
    a[1:] = 1 / hh**2 - (p - 1) / (2 * ri * hh)
    b[1:] = -2 / hh**2
    c[1:] = 1 / hh**2 + (p - 1) / (2 * ri * hh)
    tau = 1.0 / R if p == 1 else (1.0 / (R * math.log(R)) if p == 2 else (2.0 - p) / R)
    a[-1] += c[-1]
    b[-1] += c[-1] * 2 * hh * tau
    c[-1] = 0.0
    w = _thomas(a[:, None], b[:, None], c[:, None], fv[:, None])[:, 0]
    return r, w


def barrier_residual(nu: float, p: int, m: int, h: float, r_range=(1.0, 2.0)) -> dict:
    """Apply the discrete reduced Laplacian to |x1|^nu on regular nodes.

    Returns the max error against the exact value nu (nu + p - 2) r^{nu-2} and
    against the sign-flipped form -nu (p - 2 - nu) r^{nu-2}.
    """
    r = np.arange(int(round(r_range[0] / h)), int(round(r_range[1] / h)) + 1) * h
    w = lambda x: x**nu  # noqa: E731
    lap = (w(r + h) - 2 * w(r) + w(r - h)) / h**2 + (p - 1) / r * (w(r + h) - w(r - h)) / (2 * h)
    # the torus directions contribute nothing: the function does not depend on y
    exact = nu * (nu + p - 2) * r ** (nu - 2)
    flipped = -nu * (p - 2 - nu) * r ** (nu - 2)
    return dict(error=float(np.max(np.abs(lap - exact))),
                flipped_error=float(np.max(np.abs(lap - flipped))), h=h)
