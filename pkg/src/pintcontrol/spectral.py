"""Dense assembly of every operator and empirical checks of the spectral bounds.

Desk-scale only: ``N * m^2 <= 4096``.  The matrices are built by explicit
Kronecker products from the bidiagonal ``B1``, ``B2`` and the sparse ``L_h``,
independently of the FFT-based applies they are compared against.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
import itertools
import math
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .spatial import Coefficient, SpatialGrid, SpatialOperator
from .temporal import b_symbol, choose_alpha

MAX_DENSE = 4096
SLACK = 1e-10

# (label, preconditioner, operator, lower, upper)
BOUNDS = (
    ("P^-1 K", "P", "K", 0.5, 1.0),
    ("Palpha^-1 P", "Palpha", "P", 0.75, 1.5),
    ("Palpha^-1 K", "Palpha", "K", 0.375, 1.5),
)


def bidiagonal(n: int, sub: float) -> np.ndarray:
    return np.eye(n) + sub * np.eye(n, k=-1)


@dataclass
class DenseOperatorSet:
    N: int
    m: int
    gamma: float
    alpha: float
    T_final: float
    B1: np.ndarray
    B2: np.ndarray
    B: np.ndarray
    B_tilde: np.ndarray
    B_alpha: np.ndarray
    L: np.ndarray
    G: np.ndarray
    K: np.ndarray
    R: np.ndarray
    R_alpha: np.ndarray
    P: np.ndarray
    P_alpha: np.ndarray
    mask: Optional[np.ndarray] = None

    @property
    def tau(self) -> float:
        return self.T_final / self.N

    @property
    def eta(self) -> float:
        return self.gamma / self.tau


def build_dense(N: int, m: int, gamma: float, alpha: float | None = None, mask=None, *,
                T_final: float = 1.0, coefficient: Coefficient = 1.0) -> DenseOperatorSet:
    J = m * m
    if N * J > MAX_DENSE:
        raise ValueError(f"N*J = {N * J} exceeds the dense cap {MAX_DENSE}")
    tau = T_final / N
    eta = gamma / tau
    if alpha is None:
        alpha = choose_alpha(tau, gamma, T_final)

    B1 = bidiagonal(N, -1.0)
    B2 = bidiagonal(N, 1.0)
    B = np.linalg.solve(B2, B1)
    q = b_symbol(N).coeffs
    B_tilde = np.zeros((N, N))
    for i in range(N):
        for j in range(i + 1, N):
            B_tilde[i, j] = q[N - (j - i)]
    B_alpha = B + alpha * B_tilde

    L = SpatialOperator(SpatialGrid(m), coefficient, "stencil").to_dense()
    I_N, I_J = np.eye(N), np.eye(J)
    Mx = I_J if mask is None else np.diag(np.asarray(mask, dtype=float))
    G = 2.0 * np.kron(B, I_J) + tau * np.kron(I_N, L)
    K = tau * np.kron(I_N, Mx) + eta * G @ G.T
    se = math.sqrt(eta)
    R = np.kron(math.sqrt(tau) * I_N + 2.0 * se * B, I_J) + tau * se * np.kron(I_N, L)
    R_alpha = np.kron(math.sqrt(tau) * I_N + 2.0 * se * B_alpha, I_J) + tau * se * np.kron(I_N, L)
    return DenseOperatorSet(N=N, m=m, gamma=gamma, alpha=alpha, T_final=T_final,
                            B1=B1, B2=B2, B=B, B_tilde=B_tilde, B_alpha=B_alpha, L=L, G=G, K=K,
                            R=R, R_alpha=R_alpha, P=R @ R.T, P_alpha=R_alpha @ R_alpha.T,
                            mask=None if mask is None else np.asarray(mask, dtype=float))


@dataclass
class SpectrumReport:
    lo: float
    hi: float
    min_eig: float
    max_eig: float
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0


def generalized_eigenvalues(A: np.ndarray, Bm: np.ndarray) -> np.ndarray:
    """Eigenvalues of ``A^{-1} Bm`` for SPD ``A`` and symmetric ``Bm`` via Cholesky reduction."""
    for name, X in (("preconditioner", A), ("operator", Bm)):
        if not np.allclose(X, X.T, rtol=1e-12, atol=1e-12 * np.abs(X).max()):
            raise ValueError(f"{name} matrix is not symmetric")
    try:
        C = sla.cholesky(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError("preconditioner matrix is not positive definite") from exc
    Y = sla.solve_triangular(C, Bm, lower=True)
    Z = sla.solve_triangular(C, Y.T, lower=True)
    return np.linalg.eigvalsh(0.5 * (Z + Z.T))


def check_spectrum(setA: np.ndarray, setB: np.ndarray, lo: float, hi: float,
                   slack: float = SLACK) -> SpectrumReport:
    """Generalized eigenvalues of ``setB x = lambda setA x`` against ``[lo, hi]``."""
    ev = generalized_eigenvalues(setA, setB)
    if ev[0] <= 0:
        raise ValueError("operator matrix is not positive definite")
    bad = int(np.sum((ev < lo - slack) | (ev > hi + slack)))
    return SpectrumReport(lo=lo, hi=hi, min_eig=float(ev[0]), max_eig=float(ev[-1]), violations=bad)


@dataclass
class IdentityCheck:
    name: str
    max_deviation: float
    passed: bool

    def __post_init__(self):
        self.max_deviation = float(self.max_deviation)
        self.passed = bool(self.passed)


def structural_identities(ops: DenseOperatorSet, tol: float = 1e-11) -> list[IdentityCheck]:
    N, tau = ops.N, ops.tau
    B, Bt, Ba = ops.B, ops.B_tilde, ops.B_alpha
    out = []

    sign = (-1.0) ** np.arange(1, N + 1)
    rank1 = 2.0 * np.outer(sign, sign)
    dev = np.abs(B + B.T - rank1).max()
    out.append(IdentityCheck("B + B^T = 2 D 1 1^T D", dev, dev <= tol))

    BBt = Bt @ Bt.T
    norm1 = np.abs(BBt).sum(axis=0).max() if N > 1 else 0.0
    dev = abs(norm1 - 2 * N * (N - 1))
    out.append(IdentityCheck("||Bt Bt^T||_1 = 2N(N-1)", dev, dev <= tol * max(1, 2 * N * N)))
    norm2 = np.linalg.norm(BBt, 2)
    bound = 2.0 * ops.T_final**2 / tau**2
    out.append(IdentityCheck("||Bt Bt^T||_2 <= 2T^2/tau^2", max(0.0, norm2 - bound), norm2 <= bound))

    J = ops.m * ops.m
    I_N, I_J = np.eye(N), np.eye(J)
    Mx = I_J if ops.mask is None else np.diag(ops.mask)
    L, eta = ops.L, ops.eta
    expanded = (np.kron(tau * I_N, Mx) + np.kron(4 * eta * B @ B.T, I_J)
                + 2 * eta * tau * np.kron(B + B.T, L) + tau**2 * eta * np.kron(I_N, L @ L))
    dev = np.abs(ops.K - expanded).max() / max(1.0, np.abs(ops.K).max())
    out.append(IdentityCheck("K expansion", dev, dev <= tol))

    a, s = ops.alpha, (-1.0) ** N
    expected = np.sort(np.r_[N * (1 + a * s) - a * s, np.full(N - 1, -a * s)])
    got = np.linalg.eigvalsh(0.5 * (Ba + Ba.T))
    dev = np.abs(got - expected).max() / max(1.0, N)
    out.append(IdentityCheck("H(B_alpha) spectrum", dev, dev <= tol))

    j = np.arange(N)
    d = a ** (j / N)
    F = np.exp(2j * np.pi * np.outer(j, j) / N) / math.sqrt(N)
    lam = np.exp(-2j * np.pi * np.outer(j, j) / N) @ (b_symbol(N).coeffs * d)
    recon = (F * (1.0 / d)[:, None]) @ np.diag(lam) @ (F.conj().T * d[None, :])
    dev = np.abs(recon - Ba).max()
    out.append(IdentityCheck("B_alpha = D^-1 F Lambda F^* D", dev, dev <= tol * N * max(1.0, 1.0 / a)))
    return out


VERIFY_N = (2, 3, 4, 8, 16)
VERIFY_M = (1, 3, 7)
VERIFY_GAMMA = (1e-6, 1e-2, 1.0, 10.0)


def verify_instance(N: int, m: int, gamma: float, mask=None) -> list[dict]:
    """One record per bound: parameters, extreme eigenvalues, pass flag."""
    ops = build_dense(N, m, gamma, mask=mask)
    mats = {"P": ops.P, "Palpha": ops.P_alpha, "K": ops.K}
    records = []
    for label, pre, op, lo, hi in BOUNDS:
        rep = check_spectrum(mats[pre], mats[op], lo, hi)
        records.append({"N": N, "m": m, "gamma": gamma, "alpha": ops.alpha, "check": label,
                        "lo": lo, "hi": hi, "min_eig": rep.min_eig, "max_eig": rep.max_eig,
                        "violations": rep.violations, "passed": rep.passed})
    return records


def verification_grid(Ns=VERIFY_N, ms=VERIFY_M, gammas=VERIFY_GAMMA):
    for N, m, gamma in itertools.product(Ns, ms, gammas):
        yield from verify_instance(N, m, gamma)


def as_record(obj) -> dict:
    return asdict(obj)
