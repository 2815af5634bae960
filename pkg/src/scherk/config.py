"""Run configuration: TOML parsing with aggregated validation, and writing.

Layout::

    n = 3
    m = 2
    eps = 0.1
    rho = 0.443          # optional, default min period / 8
    delta = 0.0
    nu = -1.0            # optional, default depends on (n, m)

    [lattice]
    diag = [1.0, 1.0]    # or matrix = [[...], ...]; rescaled to vol(T^m) = vol(S^m)

    [basis]
    ell_max = 6

    [grid]
    neck_step = 0.01
    outer_h = 0.055      # optional, default rho / 8

    [solver]
    tol = 1e-10
    kappa = 30.0
    max_iter = 40
    threads = 1

    [output]
    dir = "out"
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import numpy as np
import tomli_w

from .errors import ConfigError, InvalidLatticeError
from .lattice import Lattice, normalize_volume
from .outer import default_nu, nu_range

_SECTIONS = {
    None: ("n", "m", "eps", "rho", "delta", "nu"),
    "lattice": ("diag", "matrix"),
    "basis": ("ell_max",),
    "grid": ("neck_step", "outer_h"),
    "solver": ("tol", "kappa", "max_iter", "threads"),
    "output": ("dir", "mesh", "report"),
}


@dataclass
class RunConfig:
    n: int = 3
    m: int = 2
    eps: float = 0.1
    rho: float | None = None
    delta: float = 0.0
    nu: float | None = None
    lattice_diag: tuple | None = None
    lattice_matrix: tuple | None = None
    ell_max: int = 6
    neck_step: float = 0.01
    outer_h: float | None = None
    tol: float = 1e-10
    kappa: float = 30.0
    max_iter: int = 40
    threads: int = 1
    out_dir: str = "out"
    mesh: str = "surface.obj"
    report: str = "report.json"
    allow_n2: bool = field(default=False, compare=False, repr=False)

    def lattice(self) -> Lattice:
        """Volume-normalized lattice; the unit cube by default."""
        if self.lattice_matrix is not None:
            lat = Lattice(np.array(self.lattice_matrix, dtype=float))
        else:
            lat = Lattice.from_diag(self.lattice_diag or [1.0] * self.m)
        return normalize_volume(lat)

    def resolved_rho(self) -> float:
        if self.rho is not None:
            return self.rho
        lat = self.lattice()
        a = lat.periods.min() if lat.is_diagonal else min(np.linalg.norm(lat.A, axis=0))
        return float(a) / 8.0

    def resolved_nu(self) -> float:
        return default_nu(self.n, self.m) if self.nu is None else self.nu

    def validate(self) -> "RunConfig":
        problems = []
        n, m = self.n, self.m
        if not isinstance(n, int) or n < (2 if self.allow_n2 else 3):
            problems.append(f"n must be an integer >= {2 if self.allow_n2 else 3}")
        elif not isinstance(m, int) or not 1 <= m <= n - 1:
            problems.append("m must be an integer with 1 <= m <= n-1")
        if not self.eps > 0:
            problems.append("eps must be > 0")
        rho = None
        try:
            lat = self.lattice() if not problems else None
            if lat is not None and lat.m != m:
                problems.append(f"lattice has dimension {lat.m}, expected m = {m}")
            elif lat is not None:
                rho = self.resolved_rho()
        except InvalidLatticeError as exc:
            problems.append(f"lattice: {exc}")
        if self.rho is not None and not 0 < self.rho <= 1:
            problems.append("rho must lie in (0, 1]")
        if rho is not None and not self.eps < rho:
            problems.append("eps must be < rho")
        if isinstance(n, int) and n >= 2:
            lo, hi = (2 - n) / 2.0, (n - 2) / 2.0
            if n >= 3 and not lo < self.delta < hi:
                problems.append(f"delta must lie in ({lo}, {hi})")
            if isinstance(m, int) and 1 <= m <= n - 1 and self.nu is not None:
                a, b = nu_range(n, m)
                if not a < self.nu < b:
                    problems.append(f"nu must lie in ({a}, {b}) for n={n}, m={m}")
        if not (isinstance(self.ell_max, int) and self.ell_max >= 0):
            problems.append("ell_max must be a nonnegative integer")
        for name in ("neck_step", "tol", "kappa"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be > 0")
        if self.outer_h is not None and not self.outer_h > 0:
            problems.append("outer_h must be > 0")
        for name in ("max_iter", "threads"):
            v = getattr(self, name)
            if not (isinstance(v, int) and v >= 1):
                problems.append(f"{name} must be a positive integer")
        if problems:
            raise ConfigError(problems)
        return self

    def to_toml_dict(self) -> dict:
        top = {"n": self.n, "m": self.m, "eps": self.eps, "delta": self.delta}
        if self.rho is not None:
            top["rho"] = self.rho
        if self.nu is not None:
            top["nu"] = self.nu
        lattice = {}
        if self.lattice_diag is not None:
            lattice["diag"] = list(self.lattice_diag)
        if self.lattice_matrix is not None:
            lattice["matrix"] = [list(r) for r in self.lattice_matrix]
        if lattice:
            top["lattice"] = lattice
        top["basis"] = {"ell_max": self.ell_max}
        grid = {"neck_step": self.neck_step}
        if self.outer_h is not None:
            grid["outer_h"] = self.outer_h
        top["grid"] = grid
        top["solver"] = {"tol": self.tol, "kappa": self.kappa, "max_iter": self.max_iter,
                         "threads": self.threads}
        top["output"] = {"dir": self.out_dir, "mesh": self.mesh, "report": self.report}
        return top


_KEYMAP = {("lattice", "diag"): "lattice_diag", ("lattice", "matrix"): "lattice_matrix",
           ("output", "dir"): "out_dir"}
_INT_FIELDS = {"n", "m", "ell_max", "max_iter", "threads"}


def config_from_dict(data: dict, allow_n2: bool = False) -> RunConfig:
    """Build and validate a :class:`RunConfig`; all problems are reported together."""
    problems = []
    kwargs = {}
    for key, val in data.items():
        if isinstance(val, dict):
            if key not in _SECTIONS or key is None:
                problems.append(f"unknown section [{key}]")
                continue
            items = [(key, k, v) for k, v in val.items()]
        else:
            items = [(None, key, val)]
        for sec, k, v in items:
            if k not in _SECTIONS[sec]:
                problems.append(f"unknown key {k!r}" + (f" in [{sec}]" if sec else ""))
                continue
            name = _KEYMAP.get((sec, k), k)
            if name in _INT_FIELDS:
                if isinstance(v, bool) or not isinstance(v, int):
                    problems.append(f"{name} must be an integer")
                    continue
            elif name in ("lattice_diag", "lattice_matrix"):
                try:
                    arr = np.asarray(v, dtype=float)
                except (TypeError, ValueError):
                    problems.append(f"{name} must be numeric")
                    continue
                v = tuple(arr.tolist()) if arr.ndim == 1 else tuple(tuple(r) for r in arr.tolist())
            elif name in ("out_dir", "mesh", "report"):
                v = str(v)
            else:
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    problems.append(f"{name} must be a number")
                    continue
                v = float(v)
            kwargs[name] = v
    if problems:
        raise ConfigError(problems)
    return RunConfig(**kwargs, allow_n2=allow_n2).validate()


def parse_config(path, allow_n2: bool = False) -> RunConfig:
    """Read and validate a TOML run configuration."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data, allow_n2)


def write_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(tomli_w.dumps(cfg.to_toml_dict()), encoding="utf-8")


def replace(cfg: RunConfig, **changes) -> RunConfig:
    """Copy with changes, validated."""
    return dataclasses.replace(cfg, **changes).validate()

