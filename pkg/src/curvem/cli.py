"""Command-line interface: mesh, validate, solve, convergence."""
from __future__ import annotations

import argparse
import logging
import os
import shlex
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import mesh as meshmod
from .geometry import GeometryError
from .local_vem import LocalError
from .poly import PolyError
from .solver import SolverError
from .verification import CASES, compute_errors, get_case, prepare_mesh, run_convergence, solve_case

CASE_NAMES = (*CASES, "from-file")
MODES = ("withgeo", "nogeo")
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("curvem")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _sizes(text: str) -> tuple[int, ...]:
    try:
        out = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("sizes must be positive integers")
    return out


@dataclass(frozen=True)
class RunConfig:
    command: str
    case: str = "curved-boundary"
    k: int = 0
    mode: str = "withgeo"
    n: int = 8
    sizes: tuple[int, ...] = (8, 16, 32, 64)
    mesh: str | None = None
    data: str = "curved-boundary"
    out: str | None = None
    jobs: int = 1
    timings: bool = False

    def canonical(self) -> str:
        """Flag string that parses back to this config."""
        parts = [self.command]
        if self.command == "validate":
            parts.append(shlex.quote(self.mesh or ""))
            return " ".join(parts)
        parts += ["--case", self.case, "--mode", self.mode]
        if self.command in ("solve", "convergence"):
            parts += ["--k", str(self.k)]
        if self.command == "convergence":
            parts += ["--sizes", ",".join(map(str, self.sizes)), "--jobs", str(self.jobs)]
            if self.timings:
                parts.append("--timings")
        else:
            parts += ["--n", str(self.n)]
        if self.case == "from-file":
            parts += ["--mesh", shlex.quote(self.mesh or ""), "--data", self.data]
        if self.out is not None:
            parts += ["--out", shlex.quote(self.out)]
        return " ".join(parts)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="curvem", description="Mixed virtual elements on curved polygonal meshes.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, with_k=True):
        sp.add_argument("--case", choices=CASE_NAMES, default="curved-boundary")
        sp.add_argument("--mode", choices=MODES, default="withgeo")
        if with_k:
            sp.add_argument("--k", type=int, default=0)
        sp.add_argument("--mesh", help="mesh file for --case from-file")
        sp.add_argument("--data", choices=tuple(CASES), default="curved-boundary",
                        help="manufactured data used with --case from-file")
        sp.add_argument("--out")

    sp = sub.add_parser("mesh", help="build a case mesh and write it to a file")
    common(sp, with_k=False)
    sp.add_argument("--n", type=int, default=8)

    sp = sub.add_parser("validate", help="report mesh quality of a mesh file")
    sp.add_argument("mesh")

    sp = sub.add_parser("solve", help="solve one case and print errors")
    common(sp)
    sp.add_argument("--n", type=int, default=8)

    sp = sub.add_parser("convergence", help="run a mesh sequence and write CSV")
    common(sp)
    sp.add_argument("--sizes", type=_sizes, default=(8, 16, 32, 64))
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--timings", action="store_true", help="fill the seconds column")
    return p


def parse_config(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    known = {f.name for f in fields(RunConfig)}
    cfg = RunConfig(**{k: v for k, v in vars(ns).items() if k in known and v is not None})
    if cfg.k < 0:
        raise UsageError("--k must be >= 0")
    if cfg.n < 1 or cfg.jobs < 1:
        raise UsageError("--n and --jobs must be >= 1")
    if cfg.case == "from-file" and not cfg.mesh:
        raise UsageError("--case from-file needs --mesh")
    if cfg.case == "from-file" and cfg.command == "convergence":
        raise UsageError("convergence needs a built-in case")
    return cfg


def _mesh_for(cfg: RunConfig):
    if cfg.case == "from-file":
        m = meshmod.load(cfg.mesh)
        return meshmod.straighten(m) if cfg.mode == "nogeo" else m
    return prepare_mesh(get_case(cfg.case), cfg.n, cfg.mode)


def _cmd_mesh(cfg: RunConfig, out) -> int:
    m = _mesh_for(cfg)
    text = meshmod.dumps(m)
    if cfg.out:
        Path(cfg.out).write_text(text, encoding="utf-8")
        print(f"wrote {cfg.out}: {m.n_cells} cells, {m.n_edges} edges", file=out)
    else:
        out.write(text)
    return 0


def _cmd_validate(cfg: RunConfig, out) -> int:
    r = meshmod.validate(meshmod.load(cfg.mesh))
    print(f"cells {r.cell_count}", file=out)
    print(f"edges {r.edge_count}", file=out)
    print(f"h {r.h:.17g}", file=out)
    print(f"min_edge_ratio {r.min_edge_ratio:.17g}", file=out)
    print(f"star_ok {sum(r.star_ok)}/{r.cell_count}", file=out)
    return 0


def _cmd_solve(cfg: RunConfig, out) -> int:
    case = get_case(cfg.data if cfg.case == "from-file" else cfg.case)
    m = _mesh_for(cfg)
    sol, flds, m = solve_case(case, cfg.n, cfg.k, cfg.mode, mesh=m)
    e_q, e_p = compute_errors(flds, case, m)
    h = float(np.mean([E.diameter for E in flds.elements]))
    lines = [f"h {h:.17g}", f"e_q {e_q:.17g}", f"e_p {e_p:.17g}", f"ndof {sol.ndof}",
             f"residual {sol.residual:.3e}"]
    text = "\n".join(lines) + "\n"
    out.write(text)
    if cfg.out:
        Path(cfg.out).write_text(text, encoding="utf-8")
    return 0


def _cmd_convergence(cfg: RunConfig, out) -> int:
    rep = run_convergence(cfg.case, cfg.k, cfg.mode, cfg.sizes, cfg.jobs)
    text = rep.to_csv(timings=cfg.timings)
    if cfg.out:
        Path(cfg.out).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    return 0


COMMANDS = {"mesh": _cmd_mesh, "validate": _cmd_validate, "solve": _cmd_solve,
            "convergence": _cmd_convergence}


def _setup_logging():
    level = LOG_LEVELS.get(os.environ.get("CURVEM_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    log.setLevel(level)


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    _setup_logging()
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        log.info("config: %s", cfg.canonical())
        return COMMANDS[cfg.command](cfg, out)
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (meshmod.ParseError, FileNotFoundError) as exc:
        print(f"curvem: {exc}", file=sys.stderr)
        return 1
    except (SolverError, LocalError, PolyError, GeometryError, meshmod.MeshError,
            np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"curvem: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
