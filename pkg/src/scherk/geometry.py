"""Finite-difference mean curvature of parametrized hypersurfaces.

A hypersurface of dimension k in R^{k+1} is given either as samples on a
structured parameter grid (with one ghost layer) or as a callable evaluated on
local stencils.  The mean curvature is H = tr(g^{-1} II) / k with
II_ij = X_ij . N, so a round sphere with inward normal has H = 1/R.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import GeometryError


def unit_normal_from_tangents(tangents, orient=None) -> np.ndarray:
    """Unit normal orthogonal to k tangent vectors.

    Parameters
    ----------
    tangents : array (..., k, k+1)
    orient : array (..., k+1), optional
        The normal is flipped where it points away from ``orient``.
    """
    tangents = np.asarray(tangents, dtype=float)
    k, d = tangents.shape[-2:]
    if d != k + 1:
        raise ValueError("need k tangent vectors in R^{k+1}")
    # generalized cross product through signed cofactors
    N = np.empty(tangents.shape[:-2] + (d,))
    for c in range(d):
        minor = np.delete(tangents, c, axis=-1)
        N[..., c] = (-1) ** c * np.linalg.det(minor)
    nrm = np.linalg.norm(N, axis=-1, keepdims=True)
    if np.any(nrm <= 0):
        raise GeometryError("tangent vectors are linearly dependent")
    N = N / nrm
    if orient is not None:
        sgn = np.sign(np.sum(N * np.asarray(orient, dtype=float), axis=-1, keepdims=True))
        sgn[sgn == 0] = 1.0
        N = N * sgn
    return N


def mean_curvature_from_derivatives(Xi, Xij, N) -> np.ndarray:
    """H from first derivatives (..., k, d), second derivatives (..., k, k, d) and normals (..., d)."""
    g = np.einsum("...ia,...ja->...ij", Xi, Xi)
    det = np.linalg.det(g)
    if np.any(~np.isfinite(det)) or np.any(det <= 0):
        raise GeometryError("degenerate metric (det g <= 0)")
    II = np.einsum("...ija,...a->...ij", Xij, N)
    k = Xi.shape[-2]
    return np.einsum("...ij,...ji->...", np.linalg.inv(g), II) / k


def mean_curvature_oriented(Xi, Xij, orient) -> np.ndarray:
    """H with the normal taken as the component of ``orient`` normal to the tangents.

    Equivalent to :func:`mean_curvature_from_derivatives` with the normal
    oriented along ``orient``, but avoids the cofactor determinants.
    """
    g = np.einsum("...ia,...ja->...ij", Xi, Xi)
    ginv = np.linalg.inv(g)
    coef = np.einsum("...ij,...ja,...a->...i", ginv, Xi, orient)
    N = orient - np.einsum("...i,...ia->...a", coef, Xi)
    nrm = np.linalg.norm(N, axis=-1, keepdims=True)
    if np.any(nrm <= 0):
        raise GeometryError("orientation vector is tangent to the surface")
    II = np.einsum("...ija,...a->...ij", Xij, N / nrm)
    k = Xi.shape[-2]
    return np.einsum("...ij,...ji->...", ginv, II) / k


def mean_curvature_immersion(X, h, normals=None, orient=None) -> np.ndarray:
    """Mean curvature on a structured parameter grid.

    Parameters
    ----------
    X : array (N_1+2, ..., N_k+2, k+1)
        Immersion samples including one ghost layer on every side.
    h : float or sequence of float
        Grid spacing per parameter axis.
    normals : array (N_1, ..., N_k, k+1), optional
        Unit normals at the interior nodes.  Computed from the tangents when
        omitted, oriented along ``orient`` if given.

    Returns
    -------
    ndarray (N_1, ..., N_k)
        Second-order accurate samples of H.
    """
    X = np.asarray(X, dtype=float)
    k = X.ndim - 1
    if X.shape[-1] != k + 1:
        raise ValueError("X must have shape (grid..., k+1) with k grid axes")
    h = np.broadcast_to(np.asarray(h, dtype=float), (k,))
    interior = tuple(slice(1, -1) for _ in range(k))

    def shifted(offsets):
        sl = tuple(slice(1 + o, X.shape[a] - 1 + o) for a, o in enumerate(offsets))
        return X[sl]

    zero = [0] * k
    center = X[interior]
    Xi = np.empty(center.shape[:-1] + (k, k + 1))
    Xij = np.empty(center.shape[:-1] + (k, k, k + 1))
    for i in range(k):
        ep, em = list(zero), list(zero)
        ep[i], em[i] = 1, -1
        Xp, Xm = shifted(ep), shifted(em)
        Xi[..., i, :] = (Xp - Xm) / (2 * h[i])
        Xij[..., i, i, :] = (Xp - 2 * center + Xm) / h[i] ** 2
        for j in range(i + 1, k):
            acc = 0.0
            for si, sj in itertools.product((1, -1), repeat=2):
                off = list(zero)
                off[i], off[j] = si, sj
                acc = acc + si * sj * shifted(off)
            Xij[..., i, j, :] = Xij[..., j, i, :] = acc / (4 * h[i] * h[j])
    if normals is None:
        normals = unit_normal_from_tangents(Xi, orient)
    return mean_curvature_from_derivatives(Xi, Xij, np.asarray(normals, dtype=float))


def stencil_offsets(k: int) -> np.ndarray:
    """Offsets (in units of h) of the 1 + 2k + 2k(k-1) point stencil."""
    offs = [np.zeros(k)]
    for i in range(k):
        for s in (1, -1):
            e = np.zeros(k)
            e[i] = s
            offs.append(e)
    for i in range(k):
        for j in range(i + 1, k):
            for si, sj in itertools.product((1, -1), repeat=2):
                e = np.zeros(k)
                e[i], e[j] = si, sj
                offs.append(e)
    return np.array(offs)


def derivatives_from_stencil(values, h) -> tuple:
    """First and second derivatives from samples on :func:`stencil_offsets`.

    ``values`` has shape (..., S, d) with S stencil points, ``h`` has shape (k,).
    """
    values = np.asarray(values, dtype=float)
    h = np.asarray(h, dtype=float)
    k = h.size
    c = values[..., 0, :]
    Xi = np.empty(c.shape[:-1] + (k, c.shape[-1]))
    Xij = np.empty(c.shape[:-1] + (k, k, c.shape[-1]))
    for i in range(k):
        p, m = values[..., 1 + 2 * i, :], values[..., 2 + 2 * i, :]
        Xi[..., i, :] = (p - m) / (2 * h[i])
        Xij[..., i, i, :] = (p - 2 * c + m) / h[i] ** 2
    idx = 1 + 2 * k
    for i in range(k):
        for j in range(i + 1, k):
            pp, pm, mp, mm = (values[..., idx + q, :] for q in range(4))
            Xij[..., i, j, :] = Xij[..., j, i, :] = (pp - pm - mp + mm) / (4 * h[i] * h[j])
            idx += 4
    return Xi, Xij


def mean_curvature_stencil(X_func, params, h, orient=None) -> np.ndarray:
    """Mean curvature of ``X_func`` at parameter points ``params`` (..., k).

    ``X_func`` maps parameter arrays (..., k) to points (..., k+1).  The normal
    is computed from the tangents and oriented along ``orient``.
    """
    params = np.asarray(params, dtype=float)
    k = params.shape[-1]
    h = np.broadcast_to(np.asarray(h, dtype=float), (k,))
    offs = stencil_offsets(k) * h
    pts = params[..., None, :] + offs
    Xi, Xij = derivatives_from_stencil(X_func(pts), h)
    N = unit_normal_from_tangents(Xi, orient)
    return mean_curvature_from_derivatives(Xi, Xij, N)
