import numpy as np
from numpy.testing import assert_allclose

from scherk.fixedpoint import Anderson
from scherk.geometry import mean_curvature_immersion, mean_curvature_stencil


def test_anderson_solves_linear_fixed_point():
    rng = np.random.default_rng(0)
    A = 0.9 * np.linalg.qr(rng.standard_normal((6, 6)))[0]
    b = rng.standard_normal(6)
    exact = np.linalg.solve(np.eye(6) - A, b)
    x = np.zeros(6)
    mix = Anderson(6)
    for _ in range(12):
        x = mix.step(x, A @ x + b)
    assert_allclose(x, exact, atol=1e-10)
    plain = Anderson(0)
    y = plain.step(np.zeros(6), b)
    assert_allclose(y, b)


def _sphere(p, R=2.0):
    u, v = p[..., 0], p[..., 1]
    return R * np.stack([np.cos(u) * np.cos(v), np.cos(u) * np.sin(v), np.sin(u)], axis=-1)


def test_sphere_curvature_grid():
    h = 1e-3
    u = np.arange(-3, 4) * h + 0.3
    v = np.arange(-3, 4) * h + 1.0
    P = np.stack(np.meshgrid(u, v, indexing="ij"), axis=-1)
    X = _sphere(P)
    H = mean_curvature_immersion(X, h, orient=-X[1:-1, 1:-1])
    assert_allclose(H, 0.5, rtol=1e-6)


def test_sphere_curvature_stencil_converges():
    params = np.array([[0.2, 0.4], [-0.5, 2.0]])
    errs = [np.max(np.abs(mean_curvature_stencil(_sphere, params, h,
                                                 orient=-_sphere(params)) - 0.5))
            for h in (1e-2, 5e-3)]
    assert errs[1] < 1e-4
    assert 3.0 < errs[0] / errs[1] < 5.0
