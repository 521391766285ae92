"""Assemble, precondition, solve and recover: one call per run."""

from __future__ import annotations

from dataclasses import dataclass
import time
from typing import Optional

import numpy as np

from .kkt import ControlProblem, apply_K, example1, assemble_rhs, error_measure, recover_solution, schur_rhs
from .pcg import SolveReport, pcg_solve
from .preconditioners import MscPreconditioner, PinTPreconditioner

PRECONDITIONERS = ("palpha", "msc", "none")


@dataclass
class SolveResult:
    problem: ControlProblem
    preconditioner: str
    report: SolveReport
    y: np.ndarray
    p: np.ndarray
    u: np.ndarray
    error: Optional[float]
    alpha: Optional[float] = None


def make_preconditioner(prob: ControlProblem, kind: str, *, alpha=None, cycles: int = 1,
                        workers: int | None = None):
    if kind == "palpha":
        return PinTPreconditioner(prob, alpha, workers=workers, cycles=cycles)
    if kind == "msc":
        return MscPreconditioner(prob)
    if kind == "none":
        return None
    raise ValueError(f"unknown preconditioner {kind!r}; expected one of {PRECONDITIONERS}")


def solve(prob: ControlProblem, kind: str = "palpha", *, alpha=None, cycles: int = 1,
          tol: float = 1e-8, maxit: int = 500, workers: int | None = None,
          reference=None) -> SolveResult:
    """Solve the control problem; ``report.wall_time`` covers only the PCG loop."""
    pre = make_preconditioner(prob, kind, alpha=alpha, cycles=cycles, workers=workers)
    rhs = assemble_rhs(prob)
    b = schur_rhs(prob, rhs)
    v, report = pcg_solve(lambda x: apply_K(prob, x, workers=workers), pre, b,
                          tol=tol, maxit=maxit, reference=reference)
    y, p, u = recover_solution(prob, v, rhs)
    err = error_measure(y, p, prob) if prob.reference_state is not None else None
    return SolveResult(problem=prob, preconditioner=kind, report=report, y=y, p=p, u=u,
                       error=err, alpha=getattr(pre, "alpha", None))


def fit_exponent(sizes, times) -> float:
    """Slope of the least-squares line through ``(log size, log time)``."""
    if len(sizes) < 2:
        return float("nan")
    return float(np.polyfit(np.log(sizes), np.log(times), 1)[0])


def bench_preconditioners(Ns, m: int = 31, gamma: float = 1e-3, *, repeats: int = 5,
                          workers: int | None = None, kinds=("palpha", "msc"), seed: int = 0,
                          min_total: float = 0.0):
    """Per-apply times ``{kind: [seconds per N]}`` on Example 1 at fixed ``m``.

    Sizes are timed round-robin, so machine noise hits every size alike; each
    entry is the best of at least ``repeats`` rounds and ``min_total`` seconds.
    """
    rng = np.random.default_rng(seed)
    cases = []
    for N in Ns:
        prob = example1(N, m, gamma)
        w = rng.standard_normal(prob.size)
        for k in kinds:
            pre = make_preconditioner(prob, k, workers=workers)
            pre(w)
            cases.append((k, pre, w))
    best = [float("inf")] * len(cases)
    spent = [0.0] * len(cases)
    rounds = 0
    while rounds < repeats or min(spent) < min_total:
        for i, (_, pre, w) in enumerate(cases):
            t0 = time.perf_counter()
            pre(w)
            dt = time.perf_counter() - t0
            best[i], spent[i] = min(best[i], dt), spent[i] + dt
        rounds += 1
    out = {k: [] for k in kinds}
    for (k, _, _), t in zip(cases, best):
        out[k].append(t)
    return out
