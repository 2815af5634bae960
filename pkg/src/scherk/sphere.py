"""Invariant spherical harmonics on S^{n-1} for the group O(n-m) x (sign flips)^m.

A point of S^{n-1} is written (x1, y) with x1 in R^{n-m}, y in R^m.  Functions
invariant under the group depend only on t = |x1|^2 and u_l = y_l^2, so an
invariant homogeneous polynomial of degree 2k is a polynomial of degree k in
(t, u_1, ..., u_m).  Harmonics are computed exactly in that representation.

Quadrature lives on the quotient: the positive orthant of S^m in the reduced
coordinates (r1, y_1, ..., y_m), r1 = |x1|, with the orbit weight r1^{p-1}.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .lattice import sphere_volume


def indicial_root(n: int, lam: float) -> float:
    """Decay/growth rate sqrt(((n-2)/2)^2 + lambda) of the mode ODE."""
    if lam < 0:
        raise ValueError("eigenvalue must be non-negative")
    return math.sqrt(((n - 2) / 2.0) ** 2 + lam)


def hyperspherical(angles) -> np.ndarray:
    """Map k angles to a point of S^k in R^{k+1}."""
    angles = np.asarray(angles, dtype=float)
    k = angles.shape[-1]
    out = np.empty(angles.shape[:-1] + (k + 1,))
    prod = np.ones(angles.shape[:-1])
    for i in range(k):
        out[..., i] = prod * np.cos(angles[..., i])
        prod = prod * np.sin(angles[..., i])
    out[..., k] = prod
    return out


def _monomials(nvars: int, degree: int) -> list:
    return [e for e in itertools.product(range(degree + 1), repeat=nvars) if sum(e) == degree][::-1]


@dataclass(frozen=True)
class SphereMode:
    index: int
    degree: int
    eigenvalue: float
    root: float
    exponents: np.ndarray = field(repr=False)
    coeffs: np.ndarray = field(repr=False)

    def eval_tu(self, t, u) -> np.ndarray:
        """Evaluate from t = |x1|^2 and u = (y_l^2) with u of shape (..., m)."""
        t = np.asarray(t, dtype=float)
        u = np.asarray(u, dtype=float)
        out = np.zeros(np.broadcast_shapes(t.shape, u.shape[:-1]))
        for e, c in zip(self.exponents, self.coeffs):
            term = c * t ** e[0]
            for ell in range(1, len(e)):
                if e[ell]:
                    term = term * u[..., ell - 1] ** e[ell]
            out = out + term
        return out


class _PolySpace:
    """Invariant polynomials in (t, u) with exact sphere integrals."""

    def __init__(self, n: int, m: int):
        self.n, self.m, self.p = n, m, n - m

    def laplacian_matrix(self, k: int) -> np.ndarray:
        rows = _monomials(self.m + 1, k - 1)
        cols = _monomials(self.m + 1, k)
        index = {e: i for i, e in enumerate(rows)}
        L = np.zeros((len(rows), len(cols)))
        for j, e in enumerate(cols):
            a = e[0]
            if a:
                f = list(e)
                f[0] -= 1
                L[index[tuple(f)], j] += 2 * a * (self.p + 2 * a - 2)
            for ell in range(1, self.m + 1):
                b = e[ell]
                if b:
                    f = list(e)
                    f[ell] -= 1
                    L[index[tuple(f)], j] += 2 * b * (2 * b - 1)
        return L

    def integral(self, e) -> float:
        """Integral over S^{n-1} of t^a prod u_l^{b_l}."""
        a, bs = e[0], e[1:]
        K = sum(e)
        logv = math.lgamma(a + self.p / 2.0) + sum(math.lgamma(b + 0.5) for b in bs)
        logv -= math.lgamma(K + self.n / 2.0)
        return sphere_volume(self.p - 1) * math.exp(logv)

    def gram(self, k: int, A: np.ndarray) -> np.ndarray:
        """L^2(S^{n-1}) Gram matrix of degree-k polynomials given as columns of A."""
        mons = _monomials(self.m + 1, k)
        M = np.empty((len(mons), len(mons)))
        for i, ei in enumerate(mons):
            for j, ej in enumerate(mons):
                M[i, j] = self.integral(tuple(x + y for x, y in zip(ei, ej)))
        return A.T @ M @ A


def _harmonic_basis(space: _PolySpace, k: int):
    """Orthonormal invariant harmonics of degree 2k as monomial coefficient columns."""
    mons = _monomials(space.m + 1, k)
    if k == 0:
        H = np.ones((1, 1))
    else:
        H = null_space(space.laplacian_matrix(k))
    if H.shape[1] == 0:
        return mons, np.zeros((len(mons), 0))
    # harmonic projection of each monomial, then Gram-Schmidt in monomial order
    G_HH = space.gram(k, H)
    G_HM = space.gram(k, np.hstack([H, np.eye(len(mons))]))[: H.shape[1], H.shape[1]:]
    proj = H @ np.linalg.solve(G_HH, G_HM)
    basis = []
    for j in range(proj.shape[1]):
        v = proj[:, j].copy()
        for _ in range(2):
            for b in basis:
                v -= space.gram(k, np.column_stack([b, v]))[0, 1] * b
        nrm2 = space.gram(k, v[:, None])[0, 0]
        if nrm2 > 1e-20 * max(1.0, space.gram(k, proj[:, j:j + 1])[0, 0]) and nrm2 > 1e-24:
            basis.append(v / math.sqrt(nrm2))
        if len(basis) == H.shape[1]:
            break
    return mons, np.column_stack(basis)


def _gauss_legendre_orthant(m: int, order: int):
    """Nodes (angles) and weights on the positive orthant of S^m."""
    x, w = np.polynomial.legendre.leggauss(order)
    beta = 0.25 * math.pi * (x + 1.0)
    w = 0.25 * math.pi * w
    grids = np.meshgrid(*([beta] * m), indexing="ij")
    wgrids = np.meshgrid(*([w] * m), indexing="ij")
    angles = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    for i in range(m - 1):
        weights = weights * np.sin(angles[:, i]) ** (m - 1 - i)
    return angles, weights


@dataclass
class InvariantSphereBasis:
    n: int
    m: int
    ell_max: int
    modes: list
    angles: np.ndarray       # (Q, m) quotient angles
    reduced: np.ndarray      # (Q, m+1) points (r1, y_1..y_m)
    weights: np.ndarray      # (Q,) weights integrating over all of S^{n-1}
    values: np.ndarray = field(repr=False)  # (Q, K)

    @property
    def p(self) -> int:
        return self.n - self.m

    def __len__(self):
        return len(self.modes)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([md.eigenvalue for md in self.modes])

    @property
    def degrees(self) -> np.ndarray:
        return np.array([md.degree for md in self.modes])

    @property
    def roots(self) -> np.ndarray:
        return np.array([md.root for md in self.modes])

    def eval_reduced(self, z) -> np.ndarray:
        """Mode values at reduced points z = (r1, y) on the unit sphere; shape (..., K)."""
        z = np.asarray(z, dtype=float)
        t = z[..., 0] ** 2
        u = z[..., 1:] ** 2
        return np.stack([md.eval_tu(t, u) for md in self.modes], axis=-1)

    def eval_full(self, theta) -> np.ndarray:
        """Mode values at points of S^{n-1} in R^n; shape (..., K)."""
        theta = np.asarray(theta, dtype=float)
        t = np.sum(theta[..., : self.p] ** 2, axis=-1)
        u = theta[..., self.p:] ** 2
        return np.stack([md.eval_tu(t, u) for md in self.modes], axis=-1)

    def project(self, samples) -> np.ndarray:
        """Coefficients of quadrature-node samples; trailing axes are batch axes."""
        samples = np.asarray(samples, dtype=float)
        if samples.shape[0] != self.weights.size:
            raise ValueError(
                f"expected {self.weights.size} node samples, got {samples.shape[0]}")
        return np.tensordot(self.values * self.weights[:, None], samples, axes=(0, 0))

    def synthesize(self, coeffs) -> np.ndarray:
        """Node values of sum_j c_j e_j; leading axis of ``coeffs`` is the mode axis."""
        return np.tensordot(self.values, np.asarray(coeffs, dtype=float), axes=(1, 0))

    def full_points(self, angles=None, gamma=None) -> np.ndarray:
        """Embed quotient angles into S^{n-1} in R^n at a fixed O(n-m) orbit point."""
        angles = self.angles if angles is None else np.asarray(angles, dtype=float)
        z = hyperspherical(angles)
        omega = hyperspherical(self.orbit_angles() if gamma is None else gamma)
        x1 = z[..., :1] * omega
        return np.concatenate([x1, z[..., 1:]], axis=-1)

    def orbit_angles(self) -> np.ndarray:
        """Generic non-degenerate angles on S^{p-1} used to place quadrature orbits."""
        g = np.full(self.p - 1, 0.5 * math.pi)
        if self.p > 1:
            g[-1] = 0.0
        return g

    def sup_norm(self, coeffs) -> float:
        return float(np.max(np.abs(self.synthesize(coeffs))))

    def c2_norm(self, coeffs) -> float:
        """Sobolev-type proxy for the C^{2,alpha} norm of boundary data."""
        coeffs = np.asarray(coeffs, dtype=float)
        return float(np.sqrt(np.sum(((1.0 + self.eigenvalues) * coeffs) ** 2)))

    def constant_coeffs(self, c: float = 1.0) -> np.ndarray:
        """Coefficients of the constant function c (mode 0 is vol^{-1/2})."""
        out = np.zeros(len(self.modes))
        out[0] = c * math.sqrt(sphere_volume(self.n - 1))
        return out

    def gram(self) -> np.ndarray:
        return (self.values * self.weights[:, None]).T @ self.values

    def report(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "ell_max": self.ell_max,
            "quadrature_nodes": int(self.weights.size),
            "modes": [
                {"index": md.index, "degree": md.degree, "eigenvalue": md.eigenvalue,
                 "indicial_root": md.root}
                for md in self.modes
            ],
        }

    def write_report(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.report(), fh, indent=2)


def build_invariant_basis(n: int, m: int, ell_max: int = 6, quad_order: int | None = None):
    """Orthonormal invariant harmonics of degree <= ell_max with quotient quadrature."""
    if n < 2 or not (1 <= m <= n - 1):
        raise ValueError(f"need n >= 2 and 1 <= m <= n-1, got n={n}, m={m}")
    if ell_max < 0:
        raise ValueError("ell_max must be non-negative")
    space = _PolySpace(n, m)
    modes = []
    for k in range(ell_max // 2 + 1):
        mons, B = _harmonic_basis(space, k)
        ell = 2 * k
        lam = float(ell * (ell + n - 2))
        for col in range(B.shape[1]):
            c = B[:, col]
            keep = np.abs(c) > 1e-15 * np.max(np.abs(c))
            modes.append(SphereMode(
                index=len(modes), degree=ell, eigenvalue=lam, root=indicial_root(n, lam),
                exponents=np.array(mons)[keep], coeffs=c[keep]))

    order = quad_order or (ell_max + 12)
    angles, w = _gauss_legendre_orthant(m, order)
    reduced = hyperspherical(angles)
    p = n - m
    weights = w * reduced[:, 0] ** (p - 1) * sphere_volume(p - 1) * 2.0**m
    basis = InvariantSphereBasis(n=n, m=m, ell_max=ell_max, modes=modes, angles=angles,
                                 reduced=reduced, weights=weights, values=np.empty((0, 0)))
    basis.values = basis.eval_reduced(reduced)
    return basis
