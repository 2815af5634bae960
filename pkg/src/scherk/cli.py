"""Command-line entry points.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS")


def _limit_threads(argv) -> None:
    """Honour --threads before numpy loads its BLAS."""
    threads = "1"
    for i, a in enumerate(argv):
        if a == "--threads" and i + 1 < len(argv):
            threads = argv[i + 1]
        elif a.startswith("--threads="):
            threads = a.split("=", 1)[1]
    for var in _THREAD_VARS:
        os.environ[var] = threads


# ------------------------------------------------------------------ helpers
def _load_config(args):
    from .config import config_from_dict, parse_config, replace

    cfg = parse_config(args.config) if getattr(args, "config", None) else config_from_dict({})
    changes = {k: getattr(args, k) for k in ("n", "m", "eps", "rho", "delta")
               if getattr(args, k, None) is not None}
    if getattr(args, "threads", None) is not None:
        changes["threads"] = args.threads
    if getattr(args, "neck_step", None) is not None:
        changes["neck_step"] = args.neck_step
    if getattr(args, "outer_h", None) is not None:
        changes["outer_h"] = args.outer_h
    return replace(cfg, **changes) if changes else cfg


def _read_coeffs(path, size: int, key: str):
    import numpy as np

    from .errors import ValidationError

    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    if isinstance(data, dict):
        data = data.get(key)
    arr = np.asarray(data, dtype=float) if data is not None else None
    if arr is None or arr.shape != (size,):
        raise ValidationError(f"{path} must hold {size} mode coefficients (list or {{'{key}': [...]}})")
    return arr


def _setup(cfg):
    from .catenoid import cached_profile
    from .sphere import build_invariant_basis

    return cached_profile(cfg.n), build_invariant_basis(cfg.n, cfg.m, cfg.ell_max)


def _out(path, default_dir=None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    if default_dir is not None and not p.is_absolute():
        p = Path(default_dir) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


# -------------------------------------------------------------- subcommands
def cmd_scherk3d(args) -> dict:
    import numpy as np

    from .meshio import scherk_mesh, write_json, write_obj
    from .oracle import ScherkSurface, blow_down_fit, blow_up_defect, level_set_mean_curvature

    surf = ScherkSurface(args.eps)
    fit = blow_down_fit(surf)
    pts = surf.sample(args.samples, seed=0)
    rep = dict(eps=args.eps, slope=fit.slope, slope_expected=fit.slope_expected,
               offset=fit.offset, offset_expected=fit.offset_expected, decay_rate=fit.decay_rate,
               max_abs_mean_curvature=float(np.max(np.abs(level_set_mean_curvature(surf, pts)))))
    if args.eps < 0.5:
        rep["blow_up_defect"] = blow_up_defect(args.eps)
    if args.mesh:
        write_obj(scherk_mesh(surf), _out(args.mesh), comment=f"Scherk surface eps={args.eps}")
    if args.report:
        write_json(rep, _out(args.report))
    return rep


def cmd_catenoid(args) -> dict:
    from .catenoid import end_expansion_check, solve_profile
    from .meshio import catenoid_slice_mesh, write_json, write_obj

    prof = solve_profile(args.n, s_max=args.smax)
    end = end_expansion_check(prof)
    rep = dict(n=args.n, s_max=args.smax, c_inf=prof.c_inf, fit_c_inf=end.c_inf, a=end.a,
               a_expected=end.a_expected, decay_exponent=end.decay_exponent,
               decay_expected=end.decay_expected)
    if args.mesh:
        S = min(args.smax, 3.0)
        write_obj(catenoid_slice_mesh(prof, S=S), _out(args.mesh),
                  comment=f"unit {args.n}-catenoid slice, |s| <= {S}")
    if args.report:
        write_json(rep, _out(args.report))
    return rep


def cmd_neck(args) -> dict:
    import numpy as np

    from .meshio import neck_slice_mesh, write_json, write_obj
    from .neck import NeckOperator, solve_neck

    cfg = _load_config(args)
    prof, basis = _setup(cfg)
    h = (_read_coeffs(args.h_file, len(basis), "h") if args.h_file else np.zeros(len(basis)))
    rho = cfg.resolved_rho()
    op = NeckOperator(basis, prof, cfg.eps, rho, step=cfg.neck_step)
    sol = solve_neck(h, cfg.eps, rho, basis, prof, cfg.delta, kappa=cfg.kappa, operator=op)
    rep = dict(eps=cfg.eps, rho=rho, s_eps=sol.s_eps, h=h, residual=sol.residual,
               w_norm=sol.w.weighted_norm(prof, cfg.delta),
               v_norm=sol.v.weighted_norm(prof, cfg.delta),
               V_norm=sol.V_norm(basis), contraction=sol.history,
               contraction_ratios=sol.contraction_ratios(), V_rho=sol.V_rho, dV_rho=sol.dV_rho)
    if args.mesh:
        write_obj(neck_slice_mesh(sol, prof, basis), _out(args.mesh),
                  comment=f"neck slice eps={cfg.eps}")
    if args.report:
        write_json(rep, _out(args.report))
    return rep


def _grid(cfg, basis):
    from .outer import QuotientDomainGrid

    return QuotientDomainGrid(basis, cfg.lattice(), cfg.resolved_rho(), h=cfg.outer_h)


def cmd_outer(args) -> dict:
    import numpy as np

    from .meshio import outer_slice_mesh, write_json, write_obj
    from .outer import outer_V_norm, solve_outer_graph

    cfg = _load_config(args)
    prof, basis = _setup(cfg)
    g = (_read_coeffs(args.g_file, len(basis), "g") if args.g_file else np.zeros(len(basis)))
    grid = _grid(cfg, basis)
    sol = solve_outer_graph(g, cfg.eps, grid, cfg.resolved_nu(), kappa=cfg.kappa)
    rep = dict(eps=cfg.eps, rho=grid.rho, g=g, residual=sol.residual, slope=sol.slope,
               offset=sol.offset, u_norm=sol.u.weighted_norm(),
               V_norm=outer_V_norm(grid, sol.V_hat, sol.dV_sphere), contraction=sol.history)
    if args.mesh:
        write_obj(outer_slice_mesh(sol, cfg.eps, prof.c_inf), _out(args.mesh),
                  comment=f"outer graph slice eps={cfg.eps}")
    if args.report:
        write_json(rep, _out(args.report))
    return rep


def glue_report(surface) -> dict:
    """Report dictionary of a glued surface with the required keys."""
    from .gluing import balancing_check

    st = surface.state
    return dict(
        n=surface.n, m=surface.m, eps=surface.eps, rho=surface.rho,
        c_eps=surface.c_eps, d_eps=surface.d_eps,
        c_over_eps_power=surface.c_eps / surface.eps ** (surface.n - 1),
        residuals=surface.certificates,
        contraction=dict(ratios=st.contraction, history=st.history, iterations=st.iteration),
        balancing=balancing_check(surface),
    )


def cmd_glue(args) -> dict:
    from .gluing import glue
    from .meshio import glued_slice_mesh, write_obj, write_report

    cfg = _load_config(args)
    prof, basis = _setup(cfg)
    grid = _grid(cfg, basis)

    def log(rec):
        print(json.dumps({k: float(v) for k, v in rec.items()}), file=sys.stderr)

    surf = glue(cfg.eps, basis, prof, cfg.lattice(), cfg.resolved_rho(), grid=grid,
                kappa=cfg.kappa, tol=cfg.tol, neck_step=cfg.neck_step, nu=cfg.resolved_nu(),
                log=log if args.verbose else None)
    rep = glue_report(surf)
    out = Path(cfg.out_dir)
    mesh = glued_slice_mesh(surf)
    write_obj(mesh, _out(args.mesh or cfg.mesh, out), comment=f"glued slice eps={cfg.eps}")
    write_report(rep, _out(args.report or cfg.report, out))
    if not args.no_figures:
        from .plotting import plot_convergence, plot_mesh, plot_neck_modes, plot_outer_slice

        plot_convergence({"update": [r["step"] for r in surf.state.history],
                          "Neumann gap": [r["neumann"] for r in surf.state.history]},
                         out / "convergence.png")
        plot_neck_modes(surf.neck, out / "neck_modes.png")
        plot_outer_slice(surf, out / "outer_slice.png")
        plot_mesh(mesh, out / "surface.png", title=f"eps = {cfg.eps:g}", vertical_scale=10.0)
    return rep


def cmd_verify(args) -> dict:
    from . import acceptance
    from .meshio import write_json

    wanted = _parse_selection(args.criteria)
    results = []
    for k, crit in enumerate(acceptance.CRITERIA, start=1):
        if k in wanted:
            res = crit()
            print(res.line(), flush=True)
            results.append(res)
    rep = {str(r.number): dict(name=r.name, passed=r.passed, elapsed=r.elapsed, budget=r.budget,
                               details=r.details) for r in results}
    if args.report:
        write_json(rep, _out(args.report))
    if not all(r.passed for r in results):
        from .errors import ConvergenceError

        raise ConvergenceError("acceptance criteria failed: "
                               + ", ".join(str(r.number) for r in results if not r.passed))
    return rep


def _parse_selection(text: str) -> set:
    from .errors import ValidationError

    out = set()
    try:
        for part in text.split(","):
            lo, _, hi = part.partition("-")
            out.update(range(int(lo), int(hi or lo) + 1))
    except ValueError as exc:
        raise ValidationError(f"bad criterion selection {text!r}") from exc
    if not out or min(out) < 1 or max(out) > 11:
        raise ValidationError("criteria are numbered 1 to 11")
    return out


# ------------------------------------------------------------------ parser
def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=_positive_int, default=None,
                        help="cap on BLAS worker threads (default 1)")
    common.add_argument("--mesh", help="OBJ output path")
    common.add_argument("--report", help="JSON report path")

    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--config", help="TOML run configuration")
    run.add_argument("--n", type=int)
    run.add_argument("--m", type=int)
    run.add_argument("--eps", type=float)
    run.add_argument("--rho", type=float)
    run.add_argument("--delta", type=float)
    run.add_argument("--neck-step", type=float)
    run.add_argument("--outer-h", type=float)

    p = argparse.ArgumentParser(prog="scherk", description=(
        "Numerical gluing of a catenoidal neck into two parallel hyperplanes, "
        "periodic in m directions."))
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("scherk3d", parents=[common], help="classical Scherk surface in R^3")
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--samples", type=int, default=10_000)
    sp.set_defaults(func=cmd_scherk3d)

    sp = sub.add_parser("catenoid", parents=[common], help="unit catenoid profile")
    sp.add_argument("--n", type=int, default=3)
    sp.add_argument("--smax", type=float, default=8.0)
    sp.set_defaults(func=cmd_catenoid)

    sp = sub.add_parser("neck", parents=[common, run], help="perturbed neck for given data h")
    sp.add_argument("--h-file", help="JSON list of mode coefficients, or {'h': [...]}")
    sp.set_defaults(func=cmd_neck)

    sp = sub.add_parser("outer", parents=[common, run], help="outer graph for given data g")
    sp.add_argument("--g-file", help="JSON list of mode coefficients, or {'g': [...]}")
    sp.set_defaults(func=cmd_outer)

    sp = sub.add_parser("glue", parents=[common, run], help="full matched surface")
    sp.add_argument("--no-figures", action="store_true")
    sp.add_argument("--verbose", action="store_true", help="log each matching step to stderr")
    sp.set_defaults(func=cmd_glue)

    sp = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    sp.add_argument("--criteria", default="1-11", help="selection such as 1-8 or 2,5,9")
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    _limit_threads(argv)
    args = build_parser().parse_args(argv)
    from .errors import ScherkError

    try:
        rep = args.func(args)
    except ScherkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not args.report and args.command in ("scherk3d", "catenoid", "neck", "outer"):
        from .meshio import _jsonable

        scalars = {k: v for k, v in _jsonable(rep).items() if not isinstance(v, (list, dict))}
        print(json.dumps(scalars, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
