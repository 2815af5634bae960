import json
import subprocess
import sys

import numpy as np
import pytest

from scherk.cli import build_parser, main
from scherk.meshio import REPORT_KEYS, read_obj


def test_catenoid_command(tmp_path):
    mesh, rep = tmp_path / "cat.obj", tmp_path / "cat.json"
    assert main(["catenoid", "--n", "3", "--smax", "8", "--mesh", str(mesh),
                 "--report", str(rep)]) == 0
    data = json.loads(rep.read_text(encoding="utf-8"))
    assert abs(data["a"] - 1.0) < 0.01
    assert read_obj(mesh).faces.shape[0] > 0


def test_scherk3d_command(tmp_path):
    rep = tmp_path / "s.json"
    assert main(["scherk3d", "--eps", "0.5", "--samples", "500", "--mesh",
                 str(tmp_path / "s.obj"), "--report", str(rep)]) == 0
    data = json.loads(rep.read_text(encoding="utf-8"))
    assert abs(data["slope"] - data["slope_expected"]) < 1e-6
    assert data["max_abs_mean_curvature"] < 1e-8


def test_validation_exit_codes(tmp_path, capsys):
    assert main(["scherk3d", "--eps", "2.0"]) == 2
    assert main(["neck", "--eps", "0.5"]) == 2
    assert main(["glue", "--config", str(tmp_path / "missing.toml")]) == 2
    bad = tmp_path / "h.json"
    bad.write_text("[1, 2]", encoding="utf-8")
    assert main(["neck", "--eps", "0.1", "--h-file", str(bad)]) == 2
    assert "error" in capsys.readouterr().err
    with pytest.raises(SystemExit) as info:
        main(["nonsense"])
    assert info.value.code == 2


def test_outer_and_neck_commands(tmp_path):
    g = tmp_path / "g.json"
    g.write_text(json.dumps({"g": (1e-3 * np.ones(10)).tolist()}), encoding="utf-8")
    rep = tmp_path / "o.json"
    assert main(["outer", "--eps", "0.1", "--outer-h", "0.11", "--g-file", str(g),
                 "--report", str(rep), "--mesh", str(tmp_path / "o.obj")]) == 0
    assert json.loads(rep.read_text())["residual"] < 1e-10
    rep = tmp_path / "n.json"
    assert main(["neck", "--eps", "0.1", "--report", str(rep),
                 "--mesh", str(tmp_path / "n.obj")]) == 0
    assert len(read_obj(tmp_path / "n.obj").vertices) > 0


@pytest.mark.slow
def test_glue_command(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(f'n = 3\nm = 2\neps = 0.1\n[grid]\nneck_step = 0.02\nouter_h = 0.11075\n'
                   f'[output]\ndir = "{tmp_path / "out"}"\n', encoding="utf-8")
    assert main(["glue", "--config", str(cfg)]) == 0
    out = tmp_path / "out"
    rep = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert set(REPORT_KEYS) <= set(rep)
    assert 0.35 < rep["c_over_eps_power"] < 0.8
    for name in ("surface.obj", "convergence.png", "surface.png", "outer_slice.png",
                 "neck_modes.png"):
        assert (out / name).stat().st_size > 0


def test_divergence_exit_code(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text("eps = 0.1\n[grid]\nneck_step = 0.02\nouter_h = 0.11075\n"
                   "[solver]\nkappa = 0.001\n", encoding="utf-8")
    assert main(["glue", "--config", str(cfg), "--no-figures"]) == 3


def test_verify_subset(tmp_path):
    rep = tmp_path / "v.json"
    assert main(["verify", "--criteria", "1-3", "--report", str(rep)]) == 0
    assert set(json.loads(rep.read_text())) == {"1", "2", "3"}
    assert main(["verify", "--criteria", "12"]) == 2


def test_parser_lists_subcommands():
    text = build_parser().format_help()
    for cmd in ("scherk3d", "catenoid", "neck", "outer", "glue", "verify"):
        assert cmd in text


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "scherk", "--help"], capture_output=True,
                         text=True, check=False)
    assert res.returncode == 0 and "glue" in res.stdout
