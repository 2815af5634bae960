import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from scherk.sphere import build_invariant_basis, indicial_root


@pytest.mark.parametrize("n,m", [(3, 1), (3, 2), (4, 2), (5, 3)])
def test_orthonormal(n, m):
    b = build_invariant_basis(n, m, 6)
    assert_allclose(b.gram(), np.eye(len(b)), atol=1e-12)


def test_eigenvalues_and_roots(basis32):
    ell = basis32.degrees
    assert np.all(ell % 2 == 0)
    assert_allclose(basis32.eigenvalues, ell * (ell + 1))
    assert_allclose(basis32.roots, [indicial_root(3, lam) for lam in basis32.eigenvalues])
    assert_allclose(basis32.roots[0], 0.5)


def test_modes_are_harmonic(basis32):
    # homogeneous extension r^ell e(x/r) is harmonic in R^n
    theta = basis32.full_points()
    d = 1e-3
    E = basis32.eval_full(theta)
    for j, ell in enumerate(basis32.degrees):
        def f(x, j=j, ell=ell):
            r = np.linalg.norm(x, axis=-1)
            return r**ell * basis32.eval_full(x / r[:, None])[:, j]
        lap = sum((f(theta + d * e) - 2 * E[:, j] + f(theta - d * e)) / d**2 for e in np.eye(3))
        assert_allclose(lap, 0.0, atol=1e-4 * max(1, ell**2))


def test_invariance(basis32):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((30, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    v = basis32.eval_full(x)
    for ax in range(3):
        y = x.copy()
        y[:, ax] *= -1
        assert_allclose(basis32.eval_full(y), v, atol=1e-13)


def test_project_synthesize_round_trip(basis32):
    c = np.random.default_rng(1).standard_normal(len(basis32))
    assert_allclose(basis32.project(basis32.synthesize(c)), c, atol=1e-12)


def test_constant_coefficients(basis32):
    c = basis32.constant_coeffs(2.0)
    assert_allclose(basis32.synthesize(c), 2.0)
    assert_allclose(basis32.sup_norm(c), 2.0)


def test_invalid_dimensions():
    with pytest.raises(ValueError):
        build_invariant_basis(3, 3)
    with pytest.raises(ValueError):
        indicial_root(3, -1.0)


def test_report_lists_modes(basis32, tmp_path):
    path = tmp_path / "basis.json"
    basis32.write_report(path)
    import json
    rep = json.loads(path.read_text())
    assert len(rep["modes"]) == len(basis32)
    assert math.isclose(rep["modes"][0]["indicial_root"], 0.5)
