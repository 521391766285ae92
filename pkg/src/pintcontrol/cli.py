"""Command-line front end.

    pintcontrol solve --problem example1 --gamma 1e-7 --N 200 --m 31
    pintcontrol reproduce --table 1 --scale desk --out table1.csv
    pintcontrol verify-spectrum --out spectrum.jsonl
    pintcontrol bench --Ns 64,128,256,512 --m 31

Run settings come from built-in defaults, then an optional flat ``key = value``
config file (``--config``), then command-line flags, later sources winning.
"""

from __future__ import annotations

import argparse
import ast
import configparser
import contextlib
import csv
from dataclasses import dataclass, fields, replace
import json
import logging
import math
import os
import sys
from typing import Optional

import numpy as np

from . import spectral
from .errors import InvalidState, NumericBreakdown
from .kkt import ControlProblem, example1, example2
from .pipeline import PRECONDITIONERS, bench_preconditioners, fit_exponent, solve
from .reference_data import TABLES
from .spatial import SpatialGrid

log = logging.getLogger("pintcontrol")

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED, EXIT_VIOLATION = 0, 1, 2, 3

CSV_HEADER = ["gamma", "N", "J", "NoU", "preconditioner", "Iter", "CPU", "E", "converged"]
REPRODUCE_HEADER = ["table"] + CSV_HEADER + ["published_Iter", "published_CPU", "published_E", "pass"]

SPATIAL_MODES = {"sine": "sine", "multigrid": "stencil"}
EXAMPLES = {"example1": example1, "example2": example2}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: str = "example1"
    gamma: float = 1e-3
    N: int = 200
    m: int = 31
    T: float = 1.0
    precond: str = "palpha"
    alpha: Optional[float] = None
    spatial: str = "sine"
    cycles: int = 1
    tol: float = 1e-8
    maxit: int = 500
    threads: int = os.cpu_count() or 1
    out: Optional[str] = None
    # custom problems: expressions in x1, x2 (and t)
    coefficient: Optional[str] = None
    source: Optional[str] = None
    target: Optional[str] = None
    y0: Optional[str] = None
    mask: Optional[str] = None
    reference_state: Optional[str] = None
    reference_control: Optional[str] = None

    def validate(self) -> "RunConfig":
        for name in ("gamma", "T", "tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("N", "m", "cycles", "maxit", "threads"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.alpha is not None and not 0 < self.alpha <= 1:
            raise ConfigError("alpha must lie in (0, 1]")
        if self.precond not in PRECONDITIONERS:
            raise ConfigError(f"precond must be one of {', '.join(PRECONDITIONERS)}")
        if self.spatial not in SPATIAL_MODES:
            raise ConfigError(f"spatial must be one of {', '.join(SPATIAL_MODES)}")
        if self.problem not in EXAMPLES and self.problem != "custom":
            raise ConfigError(f"problem must be example1, example2 or custom, got {self.problem!r}")
        if self.problem != "custom" and self.T != 1.0:
            raise ConfigError("the built-in examples are posed on T = 1")
        if self.problem == "custom" and not all((self.source, self.target, self.y0)):
            raise ConfigError("custom problems need source, target and y0 expressions")
        if self.spatial == "sine" and self.problem == "custom" and not _is_number(self.coefficient):
            raise ConfigError("spatial=sine requires a constant coefficient")
        return self


def _is_number(text) -> bool:
    if text is None:
        return True
    try:
        float(text)
    except ValueError:
        return False
    return True


_CONVERTERS = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, value):
    if value is None:
        return None
    kind = _CONVERTERS[key]
    try:
        if "int" in kind:
            return int(value)
        if "float" in kind:
            return float(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {value!r}") from exc
    return str(value)


def read_config(path: str) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_string("[run]\n" + fh.read(), source=path)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for key, value in parser["run"].items():
        if key not in _CONVERTERS:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = _convert(key, value)
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = replace(cfg, **read_config(args.config))
    flags = {k: v for k, v in vars(args).items() if k in _CONVERTERS and v is not None}
    return replace(cfg, **flags).validate()


# restricted expression evaluation for custom problems
_SAFE_NAMES = {name: getattr(np, name) for name in (
    "sin", "cos", "tan", "exp", "log", "sqrt", "abs", "sinh", "cosh", "tanh",
    "minimum", "maximum", "where", "pi", "e")}


def compile_expression(text: str, variables=("x1", "x2", "t")):
    """Turn ``text`` into a vectorized function of ``variables``."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"bad expression {text!r}: {exc.msg}") from exc
    allowed = set(_SAFE_NAMES) | set(variables)
    for node in ast.walk(tree):
        if isinstance(node, ast.Name) and node.id not in allowed:
            raise ConfigError(f"unknown name {node.id!r} in expression {text!r}")
        if isinstance(node, (ast.Attribute, ast.Subscript, ast.Lambda)):
            raise ConfigError(f"unsupported syntax in expression {text!r}")
    code = compile(tree, "<expr>", "eval")

    def fun(*args):
        env = dict(_SAFE_NAMES)
        env.update(zip(variables, args))
        return np.asarray(eval(code, {"__builtins__": {}}, env), dtype=float)

    return fun


def build_problem(cfg: RunConfig) -> ControlProblem:
    mode = SPATIAL_MODES[cfg.spatial]
    if cfg.problem in EXAMPLES:
        return EXAMPLES[cfg.problem](cfg.N, cfg.m, cfg.gamma, spatial_mode=mode)
    if _is_number(cfg.coefficient):
        coef = 1.0 if cfg.coefficient is None else float(cfg.coefficient)
    else:
        coef = compile_expression(cfg.coefficient, ("x1", "x2"))
    mask = None
    if cfg.mask is not None:
        x1, x2 = SpatialGrid(cfg.m).points()
        mask = (np.broadcast_to(compile_expression(cfg.mask, ("x1", "x2"))(x1, x2), x1.shape) != 0)
        mask = mask.astype(float)
    ref = {k: compile_expression(getattr(cfg, k)) for k in ("reference_state", "reference_control")
           if getattr(cfg, k)}
    return ControlProblem(gamma=cfg.gamma, T_final=cfg.T, N=cfg.N, m=cfg.m, coefficient=coef,
                          source=compile_expression(cfg.source), target=compile_expression(cfg.target),
                          y0=compile_expression(cfg.y0, ("x1", "x2")), mask=mask,
                          spatial_mode=mode, name="custom", **ref)


def format_row(prob: ControlProblem, precond: str, iters, cpu, err, converged) -> dict:
    return {
        "gamma": f"{prob.gamma:g}",
        "N": prob.N,
        "J": prob.J,
        "NoU": prob.size,
        "preconditioner": precond,
        "Iter": "" if iters is None else iters,
        "CPU": "" if cpu is None else f"{cpu:.4f}",
        "E": "" if err is None or not math.isfinite(err) else f"{err:.5e}",
        "converged": str(bool(converged)).lower(),
    }


@contextlib.contextmanager
def _open_out(path: Optional[str], mode: str = "w"):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, mode, newline="") as fh:
            yield fh


def cmd_solve(args) -> int:
    try:
        cfg = build_config(args)
        prob = build_problem(cfg)
    except (ConfigError, ValueError) as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_INVALID
    try:
        res = solve(prob, cfg.precond, alpha=cfg.alpha, cycles=cfg.cycles, tol=cfg.tol,
                    maxit=cfg.maxit, workers=cfg.threads)
    except ValueError as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_INVALID
    except NumericBreakdown as exc:
        log.error("numerical breakdown: %s", exc)
        return EXIT_NONCONVERGED
    rep = res.report
    row = format_row(prob, cfg.precond, rep.iterations, rep.wall_time, res.error, rep.converged)
    fresh = cfg.out in (None, "-") or not os.path.exists(cfg.out) or os.path.getsize(cfg.out) == 0
    with _open_out(cfg.out, "a") as fh:
        writer = csv.DictWriter(fh, CSV_HEADER)
        if fresh:
            writer.writeheader()
        writer.writerow(row)
    if not rep.converged:
        log.warning("PCG did not converge in %d iterations", cfg.maxit)
        return EXIT_NONCONVERGED
    return EXIT_OK


def reproduce_rows(table: int, scale: str, *, threads=None, spatial: str = "sine"):
    """Yield comparison rows for every table entry in the requested scale."""
    make = example1 if table == 1 else example2
    for ref in TABLES[table]:
        m = math.isqrt(ref.J)
        if scale == "desk" and (ref.N > 200 or m > 31):
            continue
        prob = make(ref.N, m, ref.gamma, spatial_mode=SPATIAL_MODES[spatial])
        for kind, (it, cpu, err) in (("palpha", ref[3:6]), ("msc", ref[6:9])):
            try:
                res = solve(prob, kind, workers=threads)
                rep = res.report
                row = format_row(prob, kind, rep.iterations, rep.wall_time, res.error, rep.converged)
                ok = rep.converged and abs(rep.iterations - it) <= 2
            except (NumericBreakdown, InvalidState, ValueError) as exc:
                log.error("table %d row gamma=%g N=%d J=%d %s failed: %s",
                          table, ref.gamma, ref.N, ref.J, kind, exc)
                row = format_row(prob, kind, None, None, None, False)
                ok = False
            row.update(table=table, published_Iter=it, published_CPU=f"{cpu:.2f}", published_E=f"{err:.2e}",
                       ok=ok)
            row["pass"] = str(row.pop("ok")).lower()
            yield row


def cmd_reproduce(args) -> int:
    threads = args.threads or os.cpu_count()
    with _open_out(args.out) as fh:
        writer = csv.DictWriter(fh, REPRODUCE_HEADER)
        writer.writeheader()
        for row in reproduce_rows(args.table, args.scale, threads=threads, spatial=args.spatial):
            writer.writerow(row)
            fh.flush()
    return EXIT_OK


def cmd_verify_spectrum(args) -> int:
    violations = 0
    with _open_out(args.out) as fh:
        for rec in spectral.verification_grid():
            violations += rec["violations"]
            fh.write(json.dumps(rec) + "\n")
        for N in spectral.VERIFY_N:
            ops = spectral.build_dense(N, 1, 1e-2, alpha=0.5)
            for chk in spectral.structural_identities(ops):
                violations += not chk.passed
                fh.write(json.dumps({"N": N, "alpha": ops.alpha, "check": chk.name,
                                     "max_deviation": chk.max_deviation, "passed": chk.passed}) + "\n")
    if violations:
        log.error("%d spectral violations", violations)
        return EXIT_VIOLATION
    return EXIT_OK


def _int_list(text: str):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("need at least one positive integer")
    return vals


def cmd_bench(args) -> int:
    threads = args.threads or os.cpu_count() or 1
    Ns = args.Ns
    J = args.m * args.m
    rows = []
    times = bench_preconditioners(Ns, args.m, args.gamma, repeats=args.repeats, workers=threads)
    for kind, ts in times.items():
        for N, t in zip(Ns, ts):
            rows.append({"record": "timing", "preconditioner": kind, "N": N, "J": J,
                         "threads": threads, "seconds": f"{t:.6f}", "exponent": ""})
        rows.append({"record": "fit", "preconditioner": kind, "N": "", "J": J, "threads": threads,
                     "seconds": "", "exponent": f"{fit_exponent(Ns, ts):.3f}"})
    if threads > 1:
        serial = bench_preconditioners(Ns, args.m, args.gamma, repeats=args.repeats, workers=1,
                                       kinds=("palpha",))["palpha"]
        for N, t1, tp in zip(Ns, serial, times["palpha"]):
            rows.append({"record": "speedup", "preconditioner": "palpha", "N": N, "J": J,
                         "threads": threads, "seconds": f"{tp:.6f}", "exponent": f"{t1 / tp:.3f}"})
    with _open_out(args.out) as fh:
        writer = csv.DictWriter(fh, ["record", "preconditioner", "N", "J", "threads", "seconds", "exponent"])
        writer.writeheader()
        writer.writerows(rows)
    return EXIT_OK


def _add_run_flags(p: argparse.ArgumentParser):
    # defaults are None so that unset flags do not override the config file
    p.add_argument("--config", help="flat key = value file with run settings")
    p.add_argument("--problem", help="example1, example2 or custom (expressions from --config)")
    p.add_argument("--gamma", type=float)
    p.add_argument("--N", type=int, help="number of time steps")
    p.add_argument("--m", type=int, help="interior grid points per direction (J = m^2)")
    p.add_argument("--T", type=float, help="final time")
    p.add_argument("--precond", choices=PRECONDITIONERS)
    p.add_argument("--alpha", type=float, help="override the automatic alpha")
    p.add_argument("--spatial", choices=tuple(SPATIAL_MODES))
    p.add_argument("--cycles", type=int, help="V-cycles per shifted solve (multigrid)")
    p.add_argument("--tol", type=float)
    p.add_argument("--maxit", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", help="CSV output (appended; default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pintcontrol", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one solve and write a CSV row")
    _add_run_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("reproduce", help="rerun the published tables")
    p.add_argument("--table", type=int, choices=(1, 2), required=True)
    p.add_argument("--scale", choices=("desk", "full"), default="desk")
    p.add_argument("--spatial", choices=tuple(SPATIAL_MODES), default="sine")
    p.add_argument("--threads", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("verify-spectrum", help="dense check of the eigenvalue bounds")
    p.add_argument("--out", help="JSON-lines report (default stdout)")
    p.set_defaults(func=cmd_verify_spectrum)

    p = sub.add_parser("bench", help="time preconditioner applies over N")
    p.add_argument("--Ns", type=_int_list, default=[64, 128, 256, 512])
    p.add_argument("--m", type=int, default=31)
    p.add_argument("--gamma", type=float, default=1e-3)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--threads", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
