"""Matching-Schur-complement preconditioners for ``K = tau M + eta G G^T``.

``MscPreconditioner`` applies ``P^{-1}`` with ``P = R R^T`` and

    R = (sqrt(tau) I_N + 2 sqrt(eta) B) kron I_J + tau sqrt(eta) I_N kron L_h

by block forward/backward substitution, sequential in time.

``PinTPreconditioner`` replaces ``B`` by its alpha-circulant completion
``B_alpha``.  Then ``R_alpha`` is block diagonalized by a scaled DFT in time,
and each solve is one FFT along time, ``N`` independent complex-shifted spatial
solves, and one inverse FFT.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
import math
import warnings

import numpy as np
import scipy.fft as sfft

from .errors import NumericBreakdown
from .kkt import ControlProblem
from .spatial import shifted_solve
from .temporal import alpha_circulant_eigs, alpha_invertibility_check, b_symbol, choose_alpha


def _as_blocks(prob: ControlProblem, w) -> np.ndarray:
    w = np.asarray(w)
    if w.size != prob.size:
        raise ValueError(f"vector of length {w.size} does not match N*J = {prob.size}")
    return w.reshape(prob.N, prob.J)


class MscPreconditioner:
    """``v -> P^{-1} v`` by forward then backward block substitution.

    In stencil mode the diagonal blocks are solved with V-cycles iterated to
    ``block_rtol``.
    """

    def __init__(self, prob: ControlProblem, *, block_rtol: float = 1e-12):
        self.prob = prob
        self.q = b_symbol(prob.N).coeffs
        self.sqrt_eta = math.sqrt(prob.eta)
        self.shift = math.sqrt(prob.tau) + 2.0 * self.sqrt_eta
        self.scale = prob.tau * self.sqrt_eta
        self.block_rtol = block_rtol

    def _block_solve(self, r: np.ndarray) -> np.ndarray:
        return shifted_solve(self.prob.spatial, self.shift, self.scale, r, rtol=self.block_rtol)

    def apply_R_inv(self, r) -> np.ndarray:
        Rb = _as_blocks(self.prob, r)
        X = np.zeros_like(Rb, dtype=np.result_type(Rb, float))
        c = 2.0 * self.sqrt_eta * self.q
        for n in range(self.prob.N):
            rhs = Rb[n] - c[n:0:-1] @ X[:n] if n else Rb[n]
            X[n] = self._block_solve(rhs)
        return X.reshape(np.shape(r))

    def apply_Rt_inv(self, r) -> np.ndarray:
        Rb = _as_blocks(self.prob, r)
        N = self.prob.N
        X = np.zeros_like(Rb, dtype=np.result_type(Rb, float))
        c = 2.0 * self.sqrt_eta * self.q
        for n in range(N - 1, -1, -1):
            rhs = Rb[n] - c[1:N - n] @ X[n + 1:] if n < N - 1 else Rb[n]
            X[n] = self._block_solve(rhs)
        return X.reshape(np.shape(r))

    def __call__(self, w) -> np.ndarray:
        return self.apply_Rt_inv(self.apply_R_inv(w))


class PinTPreconditioner:
    """``v -> P_alpha^{-1} v`` through the diagonalized block alpha-circulant factor.

    ``alpha`` defaults to the admissible value from ``choose_alpha``.
    ``factor_order="consistent"`` applies ``R_alpha^{-T} R_alpha^{-1}``, the
    inverse of ``R_alpha R_alpha^T``; ``"swapped"`` applies the transposed
    order ``R_alpha^{-1} R_alpha^{-T}``.  ``workers > 1`` distributes the
    FFTs over spatial traces and the shifted solves over frequencies.
    ``cycles`` is the number of V-cycles per shifted solve in stencil mode.
    """

    def __init__(self, prob: ControlProblem, alpha: float | None = None, *,
                 factor_order: str = "consistent", workers: int | None = None, cycles: int = 1):
        if alpha is None:
            alpha = choose_alpha(prob.tau, prob.gamma, prob.T_final)
        if not (alpha > 0 and alpha_invertibility_check(alpha, prob.tau, prob.gamma)):
            raise ValueError(f"alpha={alpha!r} is outside (0, 1] and (0, tau / (2 sqrt(gamma)))")
        if factor_order not in ("consistent", "swapped"):
            raise ValueError(f"unknown factor order {factor_order!r}")
        if alpha < 1e-12:
            warnings.warn(f"alpha={alpha:.3g} is tiny; the time scaling is ill-conditioned",
                          RuntimeWarning, stacklevel=2)
        self.prob = prob
        self.factor = alpha_circulant_eigs(b_symbol(prob.N), alpha)
        sqrt_eta = math.sqrt(prob.eta)
        self.sigmas = math.sqrt(prob.tau) + 2.0 * sqrt_eta * self.factor.eigs
        if np.any(self.sigmas.real <= 0):
            raise NumericBreakdown("a frequency shift has nonpositive real part")
        self.scale = prob.tau * sqrt_eta
        self.factor_order = factor_order
        self.workers = workers
        self.cycles = cycles

    @property
    def alpha(self) -> float:
        return self.factor.alpha

    def _solve_frequencies(self, Z: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
        op = self.prob.spatial
        n = len(sigmas)
        nw = self.workers or 1
        if nw <= 1 or n < 2 * nw:
            return shifted_solve(op, sigmas, self.scale, Z, cycles=self.cycles)
        chunks = np.array_split(np.arange(n), nw)
        out = np.empty_like(Z)

        def work(idx):
            out[idx] = shifted_solve(op, sigmas[idx], self.scale, Z[idx], cycles=self.cycles)

        with ThreadPoolExecutor(nw) as pool:
            list(pool.map(work, chunks))
        return out

    @property
    def half_sigmas(self) -> np.ndarray:
        # shifts are conjugate-symmetric, so real data needs k = 0..N/2 only
        return self.sigmas[: self.prob.N // 2 + 1]

    def apply_Ralpha_inv(self, r) -> np.ndarray:
        """Solve ``R_alpha x = r``: scale and FFT in time, shifted solves, inverse FFT and unscale."""
        Rb = _as_blocks(self.prob, r)
        d = self.factor.d_scale[:, None]
        N, nw = self.prob.N, self.workers
        if np.iscomplexobj(Rb):
            Z = sfft.fft(d * Rb, axis=0, workers=nw)
            X = sfft.ifft(self._solve_frequencies(Z, self.sigmas), axis=0, workers=nw) / d
        else:
            Z = sfft.rfft(d * Rb, axis=0, workers=nw)
            X = sfft.irfft(self._solve_frequencies(Z, self.half_sigmas), n=N, axis=0, workers=nw) / d
        return X.reshape(np.shape(r))

    def apply_Ralpha_T_inv(self, r) -> np.ndarray:
        """Solve ``R_alpha^T x = r`` with the roles of the forward and inverse transforms exchanged."""
        Rb = _as_blocks(self.prob, r)
        d = self.factor.d_scale[:, None]
        N, nw = self.prob.N, self.workers
        if np.iscomplexobj(Rb):
            Z = sfft.ifft(Rb / d, axis=0, workers=nw)
            X = d * sfft.fft(self._solve_frequencies(Z, self.sigmas), axis=0, workers=nw)
        else:
            # ifft followed by fft of real data is the conjugated rfft/irfft pair
            Z = sfft.rfft(Rb / d, axis=0, workers=nw)
            sig = np.conj(self.half_sigmas)
            X = d * sfft.irfft(self._solve_frequencies(Z, sig), n=N, axis=0, workers=nw)
        return X.reshape(np.shape(r))

    def __call__(self, w) -> np.ndarray:
        if self.factor_order == "consistent":
            return self.apply_Ralpha_T_inv(self.apply_Ralpha_inv(w))
        return self.apply_Ralpha_inv(self.apply_Ralpha_T_inv(w))


def apply_P_inv(pre: MscPreconditioner, w) -> np.ndarray:
    return pre(w)


def apply_Palpha_inv(pre: PinTPreconditioner, w) -> np.ndarray:
    return pre(w)


def apply_Ralpha_inv(pre: PinTPreconditioner, r) -> np.ndarray:
    return pre.apply_Ralpha_inv(r)


def apply_Ralpha_T_inv(pre: PinTPreconditioner, r) -> np.ndarray:
    return pre.apply_Ralpha_T_inv(r)
