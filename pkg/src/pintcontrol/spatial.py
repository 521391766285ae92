"""Five-point discretization of ``-div(a grad u)`` on the unit square.

Homogeneous Dirichlet conditions, ``m x m`` interior points, linear index
``(j - 1) * m + i`` for the point ``(i h, j h)`` (x1 fastest).  A spatial vector
reshaped to ``(m, m)`` therefore has x2 along axis 0 and x1 along axis 1.

Shifted systems ``(sigma I + scale L_h) x = r`` are solved either exactly with
type-I sine transforms (constant coefficient) or approximately with a
complex-capable geometric V-cycle.  All solves accept a leading batch axis with
one shift per batch entry; this is the axis the parallel-in-time
preconditioner distributes over.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from numbers import Real
from typing import Callable, Union

import numpy as np
import scipy.fft as sfft
import scipy.sparse as sp

from .errors import NumericBreakdown

DENSE_SINE_MAX = 64
# batch chunk size for the dense sine path, well inside a typical L2
CHUNK_BYTES = 1 << 19

Coefficient = Union[float, Callable[[np.ndarray, np.ndarray], np.ndarray]]

JACOBI_DAMPING = 0.8
PRE_SMOOTH = 2
POST_SMOOTH = 2


@dataclass(frozen=True)
class SpatialGrid:
    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"interior points per dimension must be >= 1, got {self.m!r}")

    @property
    def h(self) -> float:
        return 1.0 / (self.m + 1)

    @property
    def J(self) -> int:
        return self.m * self.m

    @property
    def nodes(self) -> np.ndarray:
        return self.h * np.arange(1, self.m + 1)

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """Flat coordinate arrays ``(x1, x2)`` in linear-index order."""
        x2, x1 = np.meshgrid(self.nodes, self.nodes, indexing="ij")
        return x1.ravel(), x2.ravel()

    @property
    def nestable(self) -> bool:
        """True when ``m = 2^l - 1`` so the grid coarsens down to ``m = 1``."""
        return (self.m + 1) & self.m == 0


def _sample(a: Coefficient, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    if isinstance(a, Real):
        return np.full(np.broadcast(x1, x2).shape, float(a))
    return np.broadcast_to(np.asarray(a(x1, x2), dtype=float), np.broadcast(x1, x2).shape)


class SpatialOperator:
    """Assembled ``L_h`` with its face coefficients and solve capabilities.

    ``mode`` is ``"sine"`` (constant coefficient, diagonalized by the type-I
    sine transform) or ``"stencil"`` (solved by multigrid).
    """

    def __init__(self, grid: SpatialGrid, a: Coefficient = 1.0, mode: str | None = None):
        constant = isinstance(a, Real)
        if mode is None:
            mode = "sine" if constant else "stencil"
        if mode not in ("sine", "stencil"):
            raise ValueError(f"unknown spatial mode {mode!r}")
        if mode == "sine" and not constant:
            raise ValueError("sine mode requires a constant coefficient")
        self.grid = grid
        self.coefficient = a
        self.mode = mode

        m, h = grid.m, grid.h
        nodes = grid.nodes
        faces = h * (np.arange(m + 1) + 0.5)
        # ax[j, i]: face between x1-nodes i-1 and i on row j; ay likewise along x2
        ax = _sample(a, faces[None, :], nodes[:, None])
        ay = _sample(a, nodes[None, :], faces[:, None])
        if np.any(ax <= 0) or np.any(ay <= 0) or not (np.all(np.isfinite(ax)) and np.all(np.isfinite(ay))):
            raise ValueError("diffusion coefficient must be finite and strictly positive")
        self.ax = ax / h**2
        self.ay = ay / h**2
        self.diag = self.ax[:, :-1] + self.ax[:, 1:] + self.ay[:-1, :] + self.ay[1:, :]
        for arr in (self.ax, self.ay, self.diag):
            arr.setflags(write=False)

        if mode == "sine":
            s = np.sin(np.arange(1, m + 1) * np.pi * h / 2) ** 2
            # eigs2d[q-1, p-1] with p along x1 (axis 1)
            self.eigs2d = (4.0 * float(a) / h**2) * (s[None, :] + s[:, None])
            self.eigs2d.setflags(write=False)

    @cached_property
    def sine_matrix(self) -> np.ndarray:
        """Orthonormal Type-I sine matrix; symmetric and its own inverse."""
        m = self.grid.m
        k = np.arange(1, m + 1)
        return np.sqrt(2.0 / (m + 1)) * np.sin(np.pi * np.outer(k, k) / (m + 1))

    @property
    def J(self) -> int:
        return self.grid.J

    @property
    def eigs(self) -> np.ndarray:
        """Eigenvalues in linear-index order (sine mode only)."""
        if self.mode != "sine":
            raise AttributeError("eigenvalues are only available in sine mode")
        return self.eigs2d.ravel()

    def apply2d(self, u: np.ndarray) -> np.ndarray:
        """``L_h`` on arrays shaped ``(..., m, m)``."""
        ax, ay = self.ax, self.ay
        out = self.diag * u
        out[..., :, 1:] -= ax[:, 1:-1] * u[..., :, :-1]
        out[..., :, :-1] -= ax[:, 1:-1] * u[..., :, 1:]
        out[..., 1:, :] -= ay[1:-1, :] * u[..., :-1, :]
        out[..., :-1, :] -= ay[1:-1, :] * u[..., 1:, :]
        return out

    def to_sparse(self) -> sp.csr_matrix:
        m = self.grid.m
        main = self.diag.ravel()
        east = np.zeros((m, m))
        east[:, :-1] = -self.ax[:, 1:-1]
        east = east.ravel()[:-1]
        if m == 1:
            return sp.csr_matrix(main.reshape(1, 1))
        north = (-self.ay[1:-1, :]).ravel()
        return sp.diags([main, east, east, north, north], [0, 1, -1, m, -m], format="csr")

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    @cached_property
    def coarse(self) -> "SpatialOperator":
        """Rediscretization on the grid with ``(m - 1) / 2`` interior points."""
        if not self.grid.nestable or self.grid.m < 3:
            raise ValueError(f"grid with m={self.grid.m} cannot be coarsened")
        return SpatialOperator(SpatialGrid((self.grid.m - 1) // 2), self.coefficient, "stencil")


def assemble_spatial(grid: SpatialGrid, a: Coefficient = 1.0, mode: str | None = None) -> SpatialOperator:
    return SpatialOperator(grid, a, mode)


def _as_grid(op: SpatialOperator, u) -> np.ndarray:
    u = np.asarray(u)
    if u.shape[-1] != op.J:
        raise ValueError(f"spatial vector length {u.shape[-1]} does not match J = {op.J}")
    m = op.grid.m
    return u.reshape(u.shape[:-1] + (m, m))


def apply_spatial(op: SpatialOperator, u) -> np.ndarray:
    """``L_h u`` for ``u`` with trailing axis of length ``J``."""
    U = _as_grid(op, u)
    return op.apply2d(U).reshape(np.shape(u))


def _shift_grid(sigma, batch_shape) -> np.ndarray:
    sigma = np.asarray(sigma)
    if sigma.ndim:
        sigma = np.broadcast_to(sigma, batch_shape)
    return sigma[..., None, None]


def _apply_shifted(op, sig, scale, x):
    return sig * x + scale * op.apply2d(x)


def _restrict(r: np.ndarray) -> np.ndarray:
    """Full weighting from ``m = 2 mc + 1`` to ``mc`` points per dimension."""
    p = np.pad(r, [(0, 0)] * (r.ndim - 2) + [(1, 1), (1, 1)])
    # coarse node k sits on fine node 2k + 1, i.e. padded index 2k + 2
    c = 0.5 * p[..., 2:-1:2, :] + 0.25 * (p[..., 1:-2:2, :] + p[..., 3::2, :])
    return 0.5 * c[..., :, 2:-1:2] + 0.25 * (c[..., :, 1:-2:2] + c[..., :, 3::2])


def _prolong(c: np.ndarray) -> np.ndarray:
    """Bilinear interpolation from ``mc`` to ``2 mc + 1`` points per dimension."""
    lead = c.shape[:-2]
    mc = c.shape[-1]
    m = 2 * mc + 1
    p = np.pad(c, [(0, 0)] * len(lead) + [(1, 1), (1, 1)])
    rows = np.zeros(lead + (m, mc + 2), dtype=c.dtype)
    rows[..., 1::2, :] = p[..., 1:-1, :]
    rows[..., 0::2, :] = 0.5 * (p[..., :-1, :] + p[..., 1:, :])
    out = np.zeros(lead + (m, m), dtype=c.dtype)
    out[..., :, 1::2] = rows[..., :, 1:-1]
    out[..., :, 0::2] = 0.5 * (rows[..., :, :-1] + rows[..., :, 1:])
    return out


def _coarse_direct(op: SpatialOperator, sig, scale, r: np.ndarray) -> np.ndarray:
    m = op.grid.m
    J = m * m
    L = op.to_dense()
    lead = r.shape[:-2]
    s = np.broadcast_to(sig[..., 0, 0], lead)
    A = s[..., None, None] * np.eye(J) + scale * L
    x = np.linalg.solve(A, r.reshape(lead + (J, 1)))
    return x.reshape(r.shape)


def _vcycle2d(op: SpatialOperator, sig, scale, r: np.ndarray, x: np.ndarray) -> np.ndarray:
    if op.grid.m <= 3:
        return _coarse_direct(op, sig, scale, r)
    dinv = JACOBI_DAMPING / (sig + scale * op.diag)
    for _ in range(PRE_SMOOTH):
        x = x + dinv * (r - _apply_shifted(op, sig, scale, x))
    res = r - _apply_shifted(op, sig, scale, x)
    rc = _restrict(res)
    ec = _vcycle2d(op.coarse, sig, scale, rc, np.zeros_like(rc))
    x = x + _prolong(ec)
    for _ in range(POST_SMOOTH):
        x = x + dinv * (r - _apply_shifted(op, sig, scale, x))
    return x


def _check_multigrid(op: SpatialOperator):
    if not op.grid.nestable:
        raise ValueError(f"multigrid needs m = 2^l - 1, got m={op.grid.m}")


def vcycle(op: SpatialOperator, sigma, scale: float, r, x0=None) -> np.ndarray:
    """One V(2,2)-cycle for ``(sigma I + scale L_h) x = r`` starting from ``x0``.

    Damped Jacobi smoothing (weight 4/5), full-weighting restriction, bilinear
    prolongation, rediscretized coarse operators and a dense solve once
    ``m <= 3``.  ``sigma`` may be an array with one shift per batch entry.
    """
    _check_multigrid(op)
    R = _as_grid(op, r)
    dtype = np.result_type(R, np.asarray(sigma), float)
    X = np.zeros(R.shape, dtype) if x0 is None else _as_grid(op, x0).astype(dtype)
    sig = _shift_grid(sigma, R.shape[:-2])
    return _vcycle2d(op, sig, scale, R.astype(dtype), X).reshape(np.shape(r))


def _check_denominator(denom: np.ndarray):
    if np.min(np.abs(denom)) < 1e-300:
        raise NumericBreakdown("shifted operator is singular")


def _dense_sine_solve(op: SpatialOperator, sig: np.ndarray, scale: float, R: np.ndarray) -> np.ndarray:
    """``S ((S R S) / (sig + scale eigs)) S`` over the batch, in chunks that stay in cache."""
    S, lam, m = op.sine_matrix, scale * op.eigs2d, op.grid.m
    if R.ndim == 2 and sig.size == 1:
        denom = sig + lam
        _check_denominator(denom)
        return S @ ((S @ R @ S) / denom) @ S
    shape = np.broadcast_shapes(R.shape, sig.shape)
    Rf = np.broadcast_to(R, shape).reshape(-1, m, m)
    Sf = np.broadcast_to(sig, shape[:-2] + (1, 1)).reshape(-1, 1, 1)
    out = np.empty(Rf.shape, np.result_type(Rf, Sf, S))
    step = max(1, CHUNK_BYTES // (out.itemsize * m * m))
    for i in range(0, len(Rf), step):
        denom = Sf[i:i + step] + lam
        _check_denominator(denom)
        blk = S @ Rf[i:i + step] @ S
        blk /= denom
        np.matmul(S @ blk, S, out=out[i:i + step])
    return out.reshape(shape)


def shifted_solve(op: SpatialOperator, sigma, scale: float, r, *, cycles: int = 1,
                  rtol: float | None = None, x0=None, maxcycles: int = 200,
                  workers: int | None = None) -> np.ndarray:
    """Solve ``(sigma I + scale L_h) x = r`` for each batch entry of ``r``.

    Sine mode is an exact solve.  Stencil mode runs ``cycles`` V-cycles, or, if
    ``rtol`` is given, V-cycles until the relative residual drops below it.
    """
    R = _as_grid(op, r)
    sig = _shift_grid(sigma, R.shape[:-2])
    if scale == 0:
        if np.any(sig == 0):
            raise NumericBreakdown("zero shift with zero scale")
        return (R / sig).reshape(np.shape(r))
    if op.mode == "sine":
        if op.grid.m <= DENSE_SINE_MAX:
            # per-call FFT overhead dominates at small m
            X = _dense_sine_solve(op, sig, scale, R)
        else:
            denom = sig + scale * op.eigs2d
            _check_denominator(denom)
            Rh = sfft.dstn(R, type=1, axes=(-2, -1), norm="ortho", workers=workers)
            X = sfft.idstn(Rh / denom, type=1, axes=(-2, -1), norm="ortho", workers=workers)
        return X.reshape(np.shape(r))

    _check_multigrid(op)
    dtype = np.result_type(R, sig, float)
    R = R.astype(dtype)
    X = np.zeros(R.shape, dtype) if x0 is None else _as_grid(op, x0).astype(dtype)
    if rtol is None:
        for _ in range(cycles):
            X = _vcycle2d(op, sig, scale, R, X)
        return X.reshape(np.shape(r))

    axes = (-2, -1)
    rnorm = np.sqrt(np.sum(np.abs(R) ** 2, axis=axes))
    for _ in range(maxcycles):
        X = _vcycle2d(op, sig, scale, R, X)
        res = np.sqrt(np.sum(np.abs(R - _apply_shifted(op, sig, scale, X)) ** 2, axis=axes))
        if np.all(res <= rtol * rnorm):
            return X.reshape(np.shape(r))
    raise NumericBreakdown(f"multigrid did not reach rtol={rtol} in {maxcycles} cycles")
