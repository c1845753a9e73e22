"""Command-line front end.

One entry point with a --command selector:

    ddaestab --command roots --input model.sys --out results/

Commands: roots, closed-loop-roots, abscissa, gamma0, strong-stability,
stabilize-max, stabilize-barrier.  Analysis commands write a machine
readable summary (JSON) plus roots.csv and a rendered roots.png; synthesis
commands additionally write the controller document, trace.csv and
trace.png.

Exit codes: 0 success (for synthesis: strongly stable), 1 optimization
finished without reaching C < 0, 2 input file error, 3 violated rank
assumption on the algebraic part, 4 infeasible barrier phase.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .asymptotic import gamma0, robust_difference_abscissa, strong_stability
from .model import AssumptionViolation, decompose, interconnect, plant_dynamics
from .optimize import InfeasibleProblem, SolveOptions, stabilization_barrier, stabilization_max
from .plots import save_root_plot, save_trace_plot
from .spectrum import RootOptions, compute_roots
from .sysfile import SystemFileError, load_system, write_document

__all__ = ["main", "console_main", "SessionConfig"]

COMMANDS = (
    "roots",
    "closed-loop-roots",
    "abscissa",
    "gamma0",
    "strong-stability",
    "stabilize-max",
    "stabilize-barrier",
)


@dataclass(frozen=True)
class SessionConfig:
    input: str
    command: str
    order: int = 0
    min_real_part: float | None = None
    N_max: int | None = None
    seed: int = 1
    starts: int = 5
    r: float = 1e-3
    gamma: float = 1.0 - 1e-3
    out: str = "."

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.order < 0:
            raise ValueError("controller order must be >= 0")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ddaestab",
        description="Spectral stability analysis and fixed-order stabilization of "
                    "delay differential algebraic equations.",
    )
    p.add_argument("--input", required=True, help="system definition file (JSON)")
    p.add_argument("--command", required=True, choices=COMMANDS)
    p.add_argument("--order", type=int, default=0, help="controller order for synthesis")
    p.add_argument("--min-real-part", type=float, default=None,
                   help="report only roots with real part above this bound")
    p.add_argument("--Nmax", type=int, default=None, help="cap on collocation points")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--starts", type=int, default=5)
    p.add_argument("--r", type=float, default=1e-3, help="initial barrier weight")
    p.add_argument("--gamma", type=float, default=1.0 - 1e-3,
                   help="constraint level for gamma_0")
    p.add_argument("--out", default=".", help="output directory")
    return p


def _root_opts(cfg: SessionConfig) -> RootOptions:
    kw = {}
    if cfg.min_real_part is not None:
        kw["minimal_real_part"] = cfg.min_real_part
    if cfg.N_max is not None:
        kw["N_max"] = cfg.N_max
    return RootOptions(**kw)


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def _system_for(cfg: SessionConfig, need_controller: bool):
    doc = load_system(cfg.input)
    if doc.controller is None:
        if need_controller:
            raise SystemFileError("this command needs a 'controller' block in the input")
        return doc, plant_dynamics(doc.plant)
    return doc, interconnect(doc.plant, doc.controller)


def _cmd_roots(cfg: SessionConfig, outdir: Path) -> int:
    doc, system = _system_for(cfg, cfg.command == "closed-loop-roots")
    rs = compute_roots(system, _root_opts(cfg))
    dec = decompose(system)
    cd = robust_difference_abscissa(dec)
    rs.to_csv(outdir / "roots.csv")
    save_root_plot(rs.corrected, rs.failed, outdir / "roots.png",
                   c=rs.abscissa, cd=cd, title=f"characteristic roots (N={rs.N_used})")
    summary = {
        "count": int(rs.corrected.size),
        "abscissa": _jsonable(rs.abscissa),
        "warning_cd_ge_c": bool(rs.cd_ge_c),
        "N_used": rs.N_used,
        "C_D": _jsonable(cd),
    }
    _write_json(outdir / "summary.json", summary)
    print(f"{summary['count']} corrected roots, abscissa = {summary['abscissa']}")
    if rs.cd_ge_c:
        print("warning: case C_D>=c")
    return 0


def _cmd_scalar(cfg: SessionConfig, outdir: Path) -> int:
    doc, system = _system_for(cfg, False)
    if cfg.command == "abscissa":
        from .spectrum import spectral_abscissa

        value = spectral_abscissa(system, _root_opts(cfg))
        payload = {"abscissa": _jsonable(value)}
        print(f"abscissa = {value:.6g}")
    else:
        dec = decompose(system)
        value = gamma0(dec)
        payload = {"gamma0": _jsonable(value)}
        print(f"gamma0 = {value:.6g}")
    _write_json(outdir / "summary.json", payload)
    return 0


def _cmd_report(cfg: SessionConfig, outdir: Path) -> int:
    doc, system = _system_for(cfg, False)
    report = strong_stability(system, _root_opts(cfg))
    payload = {k: _jsonable(v) for k, v in report.to_dict().items()}
    _write_json(outdir / "report.json", payload)
    for key, val in payload.items():
        print(f"{key} = {val}")
    return 0


def _cmd_stabilize(cfg: SessionConfig, outdir: Path) -> int:
    doc = load_system(cfg.input)
    opts = SolveOptions(starts=cfg.starts, seed=cfg.seed, barrier_r0=cfg.r,
                        gamma=cfg.gamma)
    if cfg.command == "stabilize-max":
        result = stabilization_max(doc.plant, cfg.order, opts)
    else:
        result = stabilization_barrier(doc.plant, cfg.order, opts)

    report = {k: _jsonable(v) for k, v in result.report.to_dict().items()}
    write_document(outdir / "controller.sys", doc.plant, result.controller, report)
    _write_json(outdir / "report.json", report)
    with open(outdir / "trace.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "objective"])
        for i, val in enumerate(result.trace):
            w.writerow([i, f"{val:.16e}"])
    save_trace_plot(result.trace, outdir / "trace.png")

    closed = interconnect(doc.plant, result.controller)
    rs = compute_roots(closed, _root_opts(cfg))
    rs.to_csv(outdir / "roots.csv")
    save_root_plot(rs.corrected, rs.failed, outdir / "roots.png",
                   c=result.report.c, cd=result.report.cd_robust,
                   title="closed-loop characteristic roots")

    print(f"objective = {result.objective:.6g}")
    print(f"strongly_stable = {result.report.strongly_stable}")
    return 0 if result.report.strongly_stable else 1


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    cfg = SessionConfig(
        input=args.input, command=args.command, order=args.order,
        min_real_part=args.min_real_part, N_max=args.Nmax, seed=args.seed,
        starts=args.starts, r=args.r, gamma=args.gamma, out=args.out,
    )
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        if cfg.command in ("roots", "closed-loop-roots"):
            return _cmd_roots(cfg, outdir)
        if cfg.command in ("abscissa", "gamma0"):
            return _cmd_scalar(cfg, outdir)
        if cfg.command == "strong-stability":
            return _cmd_report(cfg, outdir)
        return _cmd_stabilize(cfg, outdir)
    except SystemFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AssumptionViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except InfeasibleProblem as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


def console_main() -> None:
    sys.exit(main())
