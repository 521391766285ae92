"""Lower-triangular Toeplitz time operators and block alpha-circulant machinery.

Space-time vectors are stored time-major: entry ``n * J + j`` holds time node
``n + 1`` and spatial index ``j``.  Every routine here works on the time axis of
the ``(N, J)`` reshaped view.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
import scipy.fft as sfft


@dataclass(frozen=True)
class TemporalSymbol:
    """First column of an ``n x n`` lower-triangular Toeplitz matrix."""

    n: int
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.shape != (self.n,):
            raise ValueError(f"expected {self.n} coefficients, got shape {coeffs.shape}")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    def dense(self) -> np.ndarray:
        """Return the dense lower-triangular Toeplitz matrix."""
        idx = np.subtract.outer(np.arange(self.n), np.arange(self.n))
        out = np.zeros((self.n, self.n))
        mask = idx >= 0
        out[mask] = self.coeffs[idx[mask]]
        return out


@dataclass(frozen=True)
class AlphaCirculantFactor:
    """Diagonalization data of the alpha-circulant completion of a symbol.

    ``B_alpha = D^{-1} F diag(eigs) F^* D`` with ``D = diag(d_scale)`` and the
    unitary Fourier matrix ``F``.
    """

    n: int
    alpha: float
    d_scale: np.ndarray
    eigs: np.ndarray


def _check_n(n: int) -> int:
    if int(n) != n or n < 1:
        raise ValueError(f"number of time points must be a positive integer, got {n!r}")
    return int(n)


def b_symbol(n: int) -> TemporalSymbol:
    """Symbol of ``B = B2^{-1} B1``: ``q0 = 1`` and ``qk = 2 (-1)^k``."""
    n = _check_n(n)
    k = np.arange(n)
    coeffs = 2.0 * (-1.0) ** k
    coeffs[0] = 1.0
    return TemporalSymbol(n, coeffs)


def b2inv_symbol(n: int) -> TemporalSymbol:
    """Symbol of ``B2^{-1}``: ``sk = (-1)^k``."""
    n = _check_n(n)
    return TemporalSymbol(n, (-1.0) ** np.arange(n))


def identity_symbol(n: int) -> TemporalSymbol:
    n = _check_n(n)
    coeffs = np.zeros(n)
    coeffs[0] = 1.0
    return TemporalSymbol(n, coeffs)


def apply_lower_toeplitz(sym: TemporalSymbol, x, block_size: int, *,
                         transpose: bool = False, workers: int | None = None) -> np.ndarray:
    """Compute ``(T kron I_J) x`` (or the transpose) by circulant embedding.

    ``x`` may be real or complex, flat of length ``n * block_size`` or already
    shaped ``(n, block_size)``; the output has the same shape as ``x``.
    """
    x = np.asarray(x)
    n, J = sym.n, int(block_size)
    if x.size != n * J:
        raise ValueError(f"vector of length {x.size} does not match N*J = {n}*{J}")
    X = x.reshape(n, J)
    if transpose:
        X = X[::-1]
    length = sfft.next_fast_len(2 * n - 1, real=True)
    if np.iscomplexobj(X):
        c_hat = sfft.fft(sym.coeffs, n=length)
        Y = sfft.ifft(c_hat[:, None] * sfft.fft(X, n=length, axis=0, workers=workers),
                      axis=0, workers=workers)[:n]
    else:
        c_hat = sfft.rfft(sym.coeffs, n=length)
        Y = sfft.irfft(c_hat[:, None] * sfft.rfft(X, n=length, axis=0, workers=workers),
                       n=length, axis=0, workers=workers)[:n]
    if transpose:
        Y = Y[::-1]
    return np.ascontiguousarray(Y).reshape(x.shape)


def alpha_circulant_eigs(sym: TemporalSymbol, alpha: float) -> AlphaCirculantFactor:
    """Eigenvalues ``sum_j q_j alpha^(j/n) exp(-2 pi i k j / n)`` via one FFT."""
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    n = sym.n
    d_scale = alpha ** (np.arange(n) / n)
    eigs = sfft.fft(sym.coeffs * d_scale)
    return AlphaCirculantFactor(n=n, alpha=float(alpha), d_scale=d_scale, eigs=eigs)


def alpha_circulant_dense(sym: TemporalSymbol, alpha: float) -> np.ndarray:
    """Dense ``B + alpha * Btilde``; entry ``(i, j)`` for ``j > i`` is ``alpha * q[n - (j - i)]``."""
    n = sym.n
    idx = np.subtract.outer(np.arange(n), np.arange(n))
    return np.where(idx >= 0, 1.0, alpha) * sym.coeffs[idx % n]


def choose_alpha(tau: float, gamma: float, T_final: float) -> float:
    """Half of the largest alpha for which the PCG contraction rate of 1/3 is guaranteed."""
    if tau <= 0 or gamma <= 0 or T_final <= 0:
        raise ValueError("tau, gamma and T_final must all be positive")
    sg = math.sqrt(gamma)
    bounds = (
        tau / (24.0 * sg),
        tau ** 1.5 / (2.0 * math.sqrt(6.0 * gamma) * T_final),
        tau ** 2 / (8.0 * math.sqrt(3.0 * gamma) * T_final),
        1.0 / 3.0,
    )
    return 0.5 * min(bounds)


def alpha_invertibility_check(alpha: float, tau: float, gamma: float) -> bool:
    """True iff ``alpha <= 1`` and ``alpha < tau / (2 sqrt(gamma))``."""
    return alpha <= 1.0 and alpha < tau / (2.0 * math.sqrt(gamma))
