"""Triangle meshes, OBJ/JSON output and 3D slices of the computed surfaces.

Hypersurfaces of dimension n >= 3 cannot be written as triangle meshes, so
the exported meshes are 2D slices: the catenoid is cut by x_3 = ... = x_n = 0
and the glued surface by y_2 = ... = y_m = 0 (and the remaining x
coordinates zero).  Every slice is a plane of symmetry of the surface, so the
slices are themselves closed under the reflections that are checked.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.spatial import cKDTree

from .catenoid import CatenoidProfile
from .errors import AssemblyError, ValidationError


@dataclass
class TriMesh:
    vertices: np.ndarray  # (V, 3)
    faces: np.ndarray     # (F, 3) int, counter-clockwise seen from the normal side

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)

    @property
    def is_empty(self) -> bool:
        return self.vertices.shape[0] == 0 or self.faces.shape[0] == 0

    def reflected(self, axis: int) -> "TriMesh":
        """Mirror image across x_axis = 0 with the orientation restored."""
        V = self.vertices.copy()
        V[:, axis] *= -1
        return TriMesh(V, self.faces[:, ::-1])

    def face_normals(self) -> np.ndarray:
        a, b, c = (self.vertices[self.faces[:, i]] for i in range(3))
        return np.cross(b - a, c - a)


def grid_mesh(P: np.ndarray, flip: bool = False) -> TriMesh:
    """Triangulate a structured (A, B, 3) array of points, two triangles per cell."""
    A, B = P.shape[:2]
    idx = np.arange(A * B).reshape(A, B)
    a, b, c, d = idx[:-1, :-1], idx[1:, :-1], idx[1:, 1:], idx[:-1, 1:]
    tri = np.concatenate([np.stack([a, b, c], -1).reshape(-1, 3),
                          np.stack([a, c, d], -1).reshape(-1, 3)])
    if flip:
        tri = tri[:, ::-1]
    return TriMesh(P.reshape(-1, 3), tri)


def merge(meshes, tol: float = 1e-9) -> TriMesh:
    """Concatenate meshes, identify vertices closer than ``tol`` and drop degenerate faces."""
    V = np.concatenate([m.vertices for m in meshes])
    offs = np.cumsum([0] + [m.vertices.shape[0] for m in meshes[:-1]])
    F = np.concatenate([m.faces + o for m, o in zip(meshes, offs)])
    tree = cKDTree(V)
    rep = np.arange(V.shape[0])
    for i, j in sorted(tree.query_pairs(tol)):
        ri, rj = rep[i], rep[j]
        while rep[ri] != ri:
            ri = rep[ri]
        while rep[rj] != rj:
            rj = rep[rj]
        if ri != rj:
            rep[max(ri, rj)] = min(ri, rj)
    for i in range(V.shape[0]):
        r = i
        while rep[r] != r:
            r = rep[r]
        rep[i] = r
    keep, new = np.unique(rep, return_inverse=True)
    F = new[F]
    good = (F[:, 0] != F[:, 1]) & (F[:, 1] != F[:, 2]) & (F[:, 0] != F[:, 2])
    F = F[good]
    # duplicate faces (e.g. from zero-width strips on a mirror plane)
    _, first = np.unique(np.sort(F, axis=1), axis=0, return_index=True)
    return TriMesh(V[keep], F[np.sort(first)])


def symmetrize(mesh: TriMesh, axes, tol: float = 1e-9) -> TriMesh:
    """Close a fundamental piece under the reflections x_a -> -x_a for a in ``axes``."""
    out = mesh
    for ax in axes:
        out = merge([out, out.reflected(ax)], tol)
    return out


def manifold_report(mesh: TriMesh) -> dict:
    """Edge statistics of a triangle mesh.

    ``nonmanifold`` counts edges in more than two faces, ``misoriented``
    counts interior edges traversed twice in the same direction, and
    ``boundary`` lists the vertices on edges used by one face only.
    """
    F = mesh.faces
    E = np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]])
    key = np.sort(E, axis=1)
    uniq, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    directed, dcount = np.unique(E, axis=0, return_counts=True)
    boundary_edges = uniq[counts == 1]
    valence = np.bincount(boundary_edges.ravel(), minlength=mesh.vertices.shape[0])
    return {
        "vertices": int(mesh.vertices.shape[0]),
        "faces": int(F.shape[0]),
        "edges": int(uniq.shape[0]),
        "nonmanifold": int(np.sum(counts > 2)),
        "misoriented": int(np.sum(dcount > 1)),
        "boundary_edges": int(boundary_edges.shape[0]),
        "boundary_vertices": np.nonzero(valence)[0],
        "boundary_loops_closed": bool(np.all(valence[valence > 0] == 2)),
        "euler": int(mesh.vertices.shape[0] - uniq.shape[0] + F.shape[0]),
    }


def check_watertight(mesh: TriMesh, on_cut=None) -> dict:
    """Raise :class:`AssemblyError` unless the mesh is an oriented 2-manifold.

    Boundary edges are allowed only on the truncation cut, described by the
    predicate ``on_cut(vertices) -> bool array``; without it no boundary is allowed.
    """
    rep = manifold_report(mesh)
    problems = []
    if rep["nonmanifold"]:
        problems.append(f"{rep['nonmanifold']} non-manifold edges")
    if rep["misoriented"]:
        problems.append(f"{rep['misoriented']} inconsistently oriented edges")
    bv = rep["boundary_vertices"]
    if bv.size:
        ok = np.zeros(bv.size, bool) if on_cut is None else np.asarray(on_cut(mesh.vertices[bv]))
        if not np.all(ok):
            bad = mesh.vertices[bv[~ok]]
            problems.append(f"{bad.shape[0]} boundary vertices off the cut, e.g. {bad[:3].tolist()}")
    if problems:
        raise AssemblyError("; ".join(problems))
    return rep


def mesh_symmetry_defect(mesh: TriMesh, axes) -> float:
    """max over reflections of the distance from reflected vertices to the vertex set."""
    tree = cKDTree(mesh.vertices)
    worst = 0.0
    for ax in axes:
        V = mesh.vertices.copy()
        V[:, ax] *= -1
        d, _ = tree.query(V)
        worst = max(worst, float(d.max()))
    return worst


# ----------------------------------------------------------------- file I/O
def write_obj(mesh: TriMesh, path, comment: str | None = None) -> None:
    """ASCII OBJ with 1-based faces; the vertical coordinate is the last one."""
    if mesh.is_empty:
        raise ValidationError("refusing to write an empty surface")
    lines = [f"# {comment}"] if comment else []
    lines += [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_obj(path) -> TriMesh:
    V, F = [], []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            V.append([float(t) for t in parts[1:4]])
        elif parts[0] == "f":
            F.append([int(t.split("/")[0]) - 1 for t in parts[1:4]])
    return TriMesh(np.array(V), np.array(F))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


REPORT_KEYS = ("c_eps", "d_eps", "residuals", "contraction", "balancing")


def write_report(report: dict, path) -> None:
    """JSON report; the keys c_eps, d_eps, residuals, contraction and balancing are required."""
    missing = [k for k in REPORT_KEYS if k not in report]
    if missing:
        raise ValidationError(f"report lacks keys {missing}")
    Path(path).write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def write_json(data: dict, path) -> None:
    Path(path).write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


# ------------------------------------------------------------------ slices
def catenoid_slice_mesh(profile: CatenoidProfile, eps: float = 1.0, S: float = 2.0,
                        n_s: int = 41, n_angle: int = 64) -> TriMesh:
    """The cut x_3 = ... = x_n = 0 of eps X0 for |s| <= S, as a closed band."""
    if not 0 < S <= profile.s_max:
        raise ValidationError("S must lie in (0, s_max]")
    s = np.linspace(-S, S, n_s)
    a = np.linspace(0.0, 2 * math.pi, n_angle + 1)
    ph, ps = eps * profile.phi(s), eps * profile.psi(s)
    P = np.stack([ph[:, None] * np.cos(a)[None, :], ph[:, None] * np.sin(a)[None, :],
                  np.broadcast_to(ps[:, None], (n_s, n_angle + 1))], axis=-1)
    # outward normal with counter-clockwise faces when s is the first axis
    return merge([grid_mesh(P, flip=True)], tol=1e-12 * max(1.0, eps))


def scherk_mesh(surface, n_x2: int = 65, n_tau: int = 40, x1_max: float = 6.0) -> TriMesh:
    """One period (x2 in [-pi, pi]) of the Scherk surface, |x1| <= x1_max."""
    P = surface.quadrant_patch(n_x2, n_tau, x1_max)
    return symmetrize(grid_mesh(P), (0, 2), tol=1e-10)


def glued_slice_mesh(surface, n_alpha: int = 25, n_s: int = 24, n_t: int = 40) -> TriMesh:
    """Slice of the glued surface through the x_1 y_1 plane, one period in y_1.

    The fundamental piece (x1, y1, z >= 0) consists of the neck for
    0 <= s <= s_eps and the outer graph on rays from the sphere of radius rho
    to the box boundary; the two share the ring at r = rho.  The piece is
    closed under reflection in x1, y1 and z.
    """
    n, p = surface.n, surface.n - surface.m
    rho = surface.rho
    grid = surface.outer.u.grid
    alpha = np.linspace(0.0, 0.5 * math.pi, n_alpha)
    theta = np.zeros((n_alpha, n))
    theta[:, 0], theta[:, p] = np.cos(alpha), np.sin(alpha)

    s_eps = surface.neck.s_eps
    s = s_eps * np.sin(np.linspace(0.0, 0.5 * math.pi, n_s))
    spline = surface._neck_spline()
    X = surface.neck_point(s[:, None], theta[None, :, :], spline)
    neck = np.stack([X[..., 0], X[..., p], X[..., -1]], axis=-1)
    ring = neck[-1]

    # outer heights on the slice y_2 = ... = 0
    sl = (slice(None), slice(None)) + (0,) * (surface.m - 1)
    Z = surface.outer_height()[sl]
    interp = RegularGridInterpolator((grid.r, grid.y[0]), Z, bounds_error=False, fill_value=np.nan)
    a1 = grid.y[0][-1]
    with np.errstate(divide="ignore"):
        T = np.minimum(grid.R1 / np.cos(alpha), a1 / np.where(np.sin(alpha) > 0, np.sin(alpha), 0))
    tau = np.linspace(0.0, 1.0, n_t) ** 2
    basis = surface.basis
    dZ = surface.neck.dZ_rho
    dZ_theta = basis.eval_full(theta) @ dZ
    outer = np.empty((n_t, n_alpha, 3))
    for j in range(n_alpha):
        t = rho + (T[j] - rho) * tau
        x1, y1 = t * math.cos(alpha[j]), t * math.sin(alpha[j])
        z = interp(np.column_stack([np.clip(x1, 0, grid.R1), np.clip(y1, 0, a1)]))
        bad = ~np.isfinite(z)
        if bad.any():
            k = int(np.nonzero(~bad)[0][0]) if (~bad).any() else None
            if k is None or np.any(bad[k:]):
                raise AssemblyError(f"outer heights unavailable along the ray alpha = {alpha[j]:.3f}")
            # cubic Hermite blend between the neck ring and the first interpolated node
            t0, t1 = rho, t[k]
            z1 = z[k]
            d1 = (interp([[t[k + 1] * math.cos(alpha[j]), t[k + 1] * math.sin(alpha[j])]])[0] - z1) \
                / (t[k + 1] - t1)
            z0, d0 = ring[j, 2], dZ_theta[j]
            u = (t[:k] - t0) / (t1 - t0)
            L = t1 - t0
            z[:k] = ((2 * u**3 - 3 * u**2 + 1) * z0 + (u**3 - 2 * u**2 + u) * L * d0
                     + (-2 * u**3 + 3 * u**2) * z1 + (u**3 - u**2) * L * d1)
        z[0] = ring[j, 2]
        outer[:, j] = np.column_stack([x1, y1, z])
    outer[0] = ring
    scale = max(1.0, grid.R1)
    piece = merge([grid_mesh(neck), grid_mesh(outer)], tol=1e-12 * scale)
    # orient the upper sheet upwards
    if np.sum(piece.face_normals()[:, 2]) < 0:
        piece = TriMesh(piece.vertices, piece.faces[:, ::-1])
    return symmetrize(piece, (2, 0, 1), tol=1e-9 * scale)


def neck_slice_mesh(neck, profile: CatenoidProfile, basis, n_alpha: int = 25,
                    n_s: int = 24) -> TriMesh:
    """Slice of the perturbed neck C_eps(h) through the x_1 y_1 plane, both sheets."""
    from .gluing import neck_immersion, neck_spline

    n, p = basis.n, basis.n - basis.m
    alpha = np.linspace(0.0, 0.5 * math.pi, n_alpha)
    theta = np.zeros((n_alpha, n))
    theta[:, 0], theta[:, p] = np.cos(alpha), np.sin(alpha)
    s = neck.s_eps * np.sin(np.linspace(0.0, 0.5 * math.pi, n_s))
    X = neck_immersion(neck, profile, basis, s[:, None], theta[None, :, :], neck_spline(neck))
    piece = grid_mesh(np.stack([X[..., 0], X[..., p], X[..., -1]], axis=-1))
    if np.sum(piece.face_normals()[:, 2]) < 0:
        piece = TriMesh(piece.vertices, piece.faces[:, ::-1])
    return symmetrize(piece, (2, 0, 1), tol=1e-12 * max(1.0, neck.rho))


def outer_slice_mesh(outer, eps: float, c_inf: float, n_alpha: int = 25,
                     n_t: int = 40) -> TriMesh:
    """Slice y_2 = ... = 0 of the upper outer graph, both sheets, one period in y_1.

    Rays start where all four grid neighbours of the first sample lie outside
    the ball, so the inner edge sits slightly outside the sphere of radius rho.
    """
    grid = outer.u.grid
    sl = (slice(None), slice(None)) + (0,) * (grid.m - 1)
    Z = eps * c_inf + outer.u.values[sl]
    interp = RegularGridInterpolator((grid.r, grid.y[0]), Z, bounds_error=False, fill_value=np.nan)
    t0 = grid.rho + math.sqrt(2) * grid.steps[:2].max()
    alpha = np.linspace(0.0, 0.5 * math.pi, n_alpha)
    a1 = grid.y[0][-1]
    with np.errstate(divide="ignore"):
        T = np.minimum(grid.R1 / np.cos(alpha), a1 / np.where(np.sin(alpha) > 0, np.sin(alpha), 0))
    tau = np.linspace(0.0, 1.0, n_t) ** 2
    P = np.empty((n_t, n_alpha, 3))
    for j in range(n_alpha):
        t = t0 + (T[j] - t0) * tau
        x1 = np.clip(t * math.cos(alpha[j]), 0, grid.R1)
        y1 = np.clip(t * math.sin(alpha[j]), 0, a1)
        P[:, j] = np.column_stack([x1, y1, interp(np.column_stack([x1, y1]))])
    if not np.all(np.isfinite(P)):
        raise AssemblyError("outer heights unavailable on the slice")
    piece = grid_mesh(P)
    if np.sum(piece.face_normals()[:, 2]) < 0:
        piece = TriMesh(piece.vertices, piece.faces[:, ::-1])
    return symmetrize(piece, (2, 0, 1), tol=1e-9 * max(1.0, grid.R1))
