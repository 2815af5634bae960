from scherk.meshio import catenoid_slice_mesh
from scherk.plotting import (plot_catenoid_profile, plot_convergence, plot_mesh, plot_scaling,
                             plot_slope_trend)


def test_figures_are_written(tmp_path, profile3):
    paths = [
        plot_catenoid_profile(profile3, tmp_path / "a" / "profile.png"),
        plot_convergence({"step": [1.0, 0.1, 0.01], "empty": []}, tmp_path / "conv.png"),
        plot_slope_trend([0.12, 0.08, 0.05], [0.67, 0.62, 0.58], tmp_path / "slope.png"),
        plot_scaling([0.1, 0.05], [1e-2, 2.5e-3], tmp_path / "scale.png", "eps", "err", slope=2),
        plot_mesh(catenoid_slice_mesh(profile3, n_s=9, n_angle=12), tmp_path / "mesh.png",
                  title="catenoid", vertical_scale=2.0),
    ]
    for p in paths:
        assert p.exists() and p.stat().st_size > 1000
        assert p.read_bytes()[:4] == b"\x89PNG"


def test_backend_is_agg():
    import matplotlib

    assert matplotlib.get_backend().lower() == "agg"
