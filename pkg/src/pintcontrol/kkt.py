"""Discrete optimal-control problem and its symmetrized Schur-complement system.

Crank-Nicolson in time couples the state ``y`` and the adjoint ``p`` through
the bidiagonal matrices ``B1`` (stencil ``{1, -1}``) and ``B2`` (``{1, 1}``).
Scaling the unknowns by ``W = blockdiag(B2, B2^T)`` makes the saddle-point
matrix symmetric; eliminating the first block leaves

    K = tau * M + eta * G G^T,    G = 2 B kron I_J + tau I_N kron L_h,

with ``B = B2^{-1} B1``, ``eta = gamma / tau`` and ``M`` the identity or the
control mask.  All operators here are matrix-free on time-major
``(N, J)`` data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidState
from .spatial import Coefficient, SpatialGrid, SpatialOperator, apply_spatial
from .temporal import apply_lower_toeplitz, b2inv_symbol, b_symbol

SpaceTimeFunction = Callable[[np.ndarray, np.ndarray, float], np.ndarray]
SpaceFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ControlProblem:
    """Tracking-type parabolic control problem on the unit square.

    ``source``, ``target`` and ``reference_state`` are called as
    ``f(x1, x2, t)``; ``y0`` as ``y0(x1, x2)``.  ``mask`` is a 0/1 vector of
    length ``J`` marking the grid points of the control subdomain.
    """

    gamma: float
    T_final: float
    N: int
    m: int
    coefficient: Coefficient
    source: SpaceTimeFunction
    target: SpaceTimeFunction
    y0: SpaceFunction
    mask: Optional[np.ndarray] = None
    reference_state: Optional[SpaceTimeFunction] = None
    reference_control: Optional[SpaceTimeFunction] = None
    spatial_mode: Optional[str] = None
    name: str = "custom"
    spatial: SpatialOperator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")
        if not self.T_final > 0:
            raise ValueError(f"T_final must be positive, got {self.T_final!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        grid = SpatialGrid(self.m)
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=float)
            if mask.shape != (grid.J,) or not np.all((mask == 0) | (mask == 1)):
                raise ValueError("mask must be a 0/1 vector of length J")
            if not mask.any():
                raise ValueError("mask must select at least one grid point")
            mask.setflags(write=False)
            object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "spatial", SpatialOperator(grid, self.coefficient, self.spatial_mode))

    @property
    def grid(self) -> SpatialGrid:
        return self.spatial.grid

    @property
    def J(self) -> int:
        return self.grid.J

    @property
    def tau(self) -> float:
        return self.T_final / self.N

    @property
    def eta(self) -> float:
        return self.gamma / self.tau

    @property
    def size(self) -> int:
        return self.N * self.J

    def times(self) -> np.ndarray:
        """Time nodes ``t_0, ..., t_N``."""
        return self.tau * np.arange(self.N + 1)

    def sample(self, fun: SpaceTimeFunction, times) -> np.ndarray:
        x1, x2 = self.grid.points()
        return np.stack([np.broadcast_to(fun(x1, x2, t), x1.shape) for t in times]).astype(float)


@dataclass(frozen=True)
class DiscreteRhs:
    g_rhs: np.ndarray
    f_rhs: np.ndarray


def _check(prob: ControlProblem, v) -> np.ndarray:
    v = np.asarray(v)
    if v.size != prob.size:
        raise ValueError(f"vector of length {v.size} does not match N*J = {prob.size}")
    return v.reshape(prob.N, prob.J)


def assemble_rhs(prob: ControlProblem) -> DiscreteRhs:
    """Right-hand sides of the state and adjoint block rows.

    The state rows use trapezoidal averages of ``f`` with the initial
    condition folded into block 1.  The adjoint rows use ``tau * g(t_n)``,
    halved in block 1 where the first row of ``B2`` has a single entry.
    Averaging ``g`` over ``t_{n-1}, t_n`` instead puts a stray ``g(t_0)``
    term in block 1 that ``B2^{-1}`` spreads as an O(1) oscillation in the
    state for small ``gamma``.
    """
    t = prob.times()
    F = prob.sample(prob.source, t)
    f_rhs = 0.5 * prob.tau * (F[1:] + F[:-1])
    g_rhs = prob.tau * prob.sample(prob.target, t[1:])
    g_rhs[0] *= 0.5
    x1, x2 = prob.grid.points()
    y0 = np.broadcast_to(prob.y0(x1, x2), x1.shape).astype(float)
    f_rhs[0] += y0 - 0.5 * prob.tau * apply_spatial(prob.spatial, y0)
    return DiscreteRhs(g_rhs=g_rhs.ravel(), f_rhs=f_rhs.ravel())


def scale_rhs(rhs: DiscreteRhs) -> DiscreteRhs:
    """The symmetrized system keeps the original right-hand side."""
    return rhs


def unscale_solution(prob: ControlProblem, y_tilde, p_tilde, *, workers=None):
    """``y = (B2^{-1} kron I) y_tilde`` and ``p = (B2^{-T} kron I) p_tilde``."""
    s = b2inv_symbol(prob.N)
    y = apply_lower_toeplitz(s, _check(prob, y_tilde), prob.J, workers=workers)
    p = apply_lower_toeplitz(s, _check(prob, p_tilde), prob.J, transpose=True, workers=workers)
    return y.ravel(), p.ravel()


def apply_G(prob: ControlProblem, v, *, workers=None) -> np.ndarray:
    V = _check(prob, v)
    out = 2.0 * apply_lower_toeplitz(b_symbol(prob.N), V, prob.J, workers=workers)
    out += prob.tau * apply_spatial(prob.spatial, V)
    return out.reshape(np.shape(v))


def apply_Gt(prob: ControlProblem, v, *, workers=None) -> np.ndarray:
    V = _check(prob, v)
    out = 2.0 * apply_lower_toeplitz(b_symbol(prob.N), V, prob.J, transpose=True, workers=workers)
    out += prob.tau * apply_spatial(prob.spatial, V)
    return out.reshape(np.shape(v))


def mass_apply(prob: ControlProblem, v) -> np.ndarray:
    """``(I_N kron M) v`` with ``M`` the control mask (identity when unmasked)."""
    if prob.mask is None:
        return np.array(v, copy=True)
    return (_check(prob, v) * prob.mask).reshape(np.shape(v))


def apply_K(prob: ControlProblem, v, *, workers=None) -> np.ndarray:
    """``tau * M v + eta * G G^T v``."""
    return prob.tau * mass_apply(prob, v) + prob.eta * apply_G(prob, apply_Gt(prob, v, workers=workers),
                                                              workers=workers)


def schur_rhs(prob: ControlProblem, rhs: DiscreteRhs) -> np.ndarray:
    return rhs.f_rhs - apply_G(prob, rhs.g_rhs) / prob.tau


def recover_solution(prob: ControlProblem, v, rhs: DiscreteRhs):
    """Map the Schur solution back to the state, adjoint and control."""
    p_tilde = -2.0 * prob.gamma * np.asarray(v)
    y_tilde = (2.0 / prob.tau) * rhs.g_rhs + (2.0 * prob.gamma / prob.tau) * apply_Gt(prob, v)
    y, p = unscale_solution(prob, y_tilde, p_tilde)
    u = mass_apply(prob, p) / prob.gamma
    return y, p, u


def reference_solution(prob: ControlProblem):
    """Reference ``(y, p)`` sampled at ``t_1..t_N``; ``p = gamma u`` (zero when no control is given)."""
    if prob.reference_state is None:
        raise InvalidState("problem carries no analytical reference")
    t = prob.times()[1:]
    y = prob.sample(prob.reference_state, t).ravel()
    if prob.reference_control is None:
        p = np.zeros_like(y)
    else:
        p = prob.gamma * prob.sample(prob.reference_control, t).ravel()
    return y, p


def error_measure(y, p, prob: ControlProblem) -> float:
    """Infinity norm of the stacked ``(p, y)`` error against the reference."""
    y_ref, p_ref = reference_solution(prob)
    return float(max(np.max(np.abs(np.asarray(p) - p_ref)), np.max(np.abs(np.asarray(y) - y_ref))))


def _bump(x1, x2):
    return np.sin(np.pi * x1) * np.sin(np.pi * x2)


def _example_data():
    source = lambda x1, x2, t: (2 * np.pi**2 - 1) * _bump(x1, x2) * np.exp(-t)
    state = lambda x1, x2, t: _bump(x1, x2) * np.exp(-t)
    control = lambda x1, x2, t: np.zeros_like(x1)
    return source, state, control


def example1(N: int, m: int, gamma: float, *, spatial_mode: str | None = None) -> ControlProblem:
    """Distributed control with exact solution ``y = sin sin e^{-t}``, ``u = 0``."""
    source, state, control = _example_data()
    return ControlProblem(gamma=gamma, T_final=1.0, N=N, m=m, coefficient=1.0,
                          source=source, target=state, y0=_bump,
                          reference_state=state, reference_control=control,
                          spatial_mode=spatial_mode, name="example1")


def lower_left_excluded_mask(grid: SpatialGrid) -> np.ndarray:
    """0 on the closed lower-left quarter ``x1 <= 0.5 and x2 <= 0.5``, 1 elsewhere."""
    x1, x2 = grid.points()
    return ((x1 > 0.5) | (x2 > 0.5)).astype(float)


def example2(N: int, m: int, gamma: float, *, spatial_mode: str | None = None) -> ControlProblem:
    """Example 1 with the control restricted to ``(0,1)^2 \\ (0,0.5)^2``."""
    source, state, control = _example_data()
    return ControlProblem(gamma=gamma, T_final=1.0, N=N, m=m, coefficient=1.0,
                          source=source, target=state, y0=_bump,
                          mask=lower_left_excluded_mask(SpatialGrid(m)),
                          reference_state=state, reference_control=control,
                          spatial_mode=spatial_mode, name="example2")
