import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from scherk.errors import AssemblyError, ValidationError
from scherk.meshio import (REPORT_KEYS, TriMesh, catenoid_slice_mesh, check_watertight, grid_mesh,
                           manifold_report, merge, mesh_symmetry_defect, read_obj, scherk_mesh,
                           symmetrize, write_json, write_obj, write_report)
from scherk.oracle import ScherkSurface


def test_catenoid_round_trip(profile3, tmp_path):
    mesh = catenoid_slice_mesh(profile3)
    path = tmp_path / "cat.obj"
    write_obj(mesh, path, comment="catenoid")
    back = read_obj(path)
    assert back.vertices.shape == mesh.vertices.shape
    assert_allclose(back.vertices, mesh.vertices, rtol=0, atol=0)
    np.testing.assert_array_equal(back.faces, mesh.faces)
    S = 2.0
    cut = lambda V: np.isclose(np.abs(V[:, 2]), profile3.psi(S))  # noqa: E731
    rep = check_watertight(back, on_cut=cut)
    assert rep["boundary_loops_closed"]
    assert mesh_symmetry_defect(back, (0, 1, 2)) < 1e-12


def test_catenoid_normals_point_outwards(profile3):
    mesh = catenoid_slice_mesh(profile3)
    c = mesh.vertices[mesh.faces].mean(axis=1)
    N = mesh.face_normals()
    assert np.all(np.sum(N[:, :2] * c[:, :2], axis=1) > 0)


def test_empty_mesh_not_written(tmp_path):
    path = tmp_path / "empty.obj"
    with pytest.raises(ValidationError):
        write_obj(TriMesh(np.zeros((0, 3)), np.zeros((0, 3))), path)
    assert not path.exists()


def test_open_mesh_rejected():
    P = np.stack(np.meshgrid(np.linspace(0, 1, 3), np.linspace(0, 1, 3), [0.0], indexing="ij"),
                 -1)[:, :, 0]
    with pytest.raises(AssemblyError):
        check_watertight(grid_mesh(P))


def test_merge_and_symmetrize():
    P = np.stack(np.meshgrid(np.linspace(0, 1, 4), np.linspace(0, 1, 3), [0.0], indexing="ij"),
                 -1)[:, :, 0]
    m = grid_mesh(P)
    both = symmetrize(m, (0,))
    assert both.vertices.shape[0] == 2 * 12 - 3
    assert manifold_report(both)["misoriented"] == 0
    assert merge([m, m]).faces.shape == m.faces.shape


def test_scherk_mesh_lies_on_surface():
    surf = ScherkSurface(0.6)
    mesh = scherk_mesh(surf, n_x2=17, n_tau=12, x1_max=3.0)
    assert_allclose(surf.F(mesh.vertices), 0.0, atol=1e-9)
    assert manifold_report(mesh)["nonmanifold"] == 0
    assert mesh_symmetry_defect(mesh, (0, 1, 2)) < 1e-9


def test_report_keys(tmp_path):
    path = tmp_path / "r.json"
    with pytest.raises(ValidationError):
        write_report({"c_eps": 1.0}, path)
    rep = {k: 1.0 for k in REPORT_KEYS}
    rep["residuals"] = {"x": np.float64(2.0), "arr": np.arange(3), "flag": np.bool_(True)}
    write_report(rep, path)
    data = json.loads(path.read_text(encoding="utf-8"))
    assert set(REPORT_KEYS) <= set(data)
    assert data["residuals"]["arr"] == [0, 1, 2]


def test_json_non_finite(tmp_path):
    path = tmp_path / "x.json"
    write_json({"a": float("inf"), "b": np.nan}, path)
    assert json.loads(path.read_text()) == {"a": "inf", "b": "nan"}
