"""Solver-agnostic conic program container and matrix helpers.

A program is

    minimize    c @ x
    subject to  A_i @ x + b_i  in  K_i   for every block i,

where each cone K_i is one of: "zero" (equality), "nonneg" (componentwise),
"soc" (second-order cone, first coordinate bounds the Euclidean norm of the
rest), or "psd" (positive semidefinite; the block value is the scaled upper
triangle of a symmetric matrix, see svec/smat below).

PSD blocks use the isometric vectorization with sqrt(2) on off-diagonal
entries so that svec(X) @ svec(Y) == trace(X @ Y).  Complex Hermitian
matrix variables are handled through the real embedding
[[Re W, -Im W], [Im W, Re W]], which doubles eigenvalue multiplicities but
preserves semidefiniteness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

ZERO = "zero"
NONNEG = "nonneg"
SOC = "soc"
PSD = "psd"

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITER = "max_iter"
NUMERICAL_FAILURE = "numerical_failure"


def svec(X: np.ndarray) -> np.ndarray:
    """Scaled upper-triangle vectorization of a symmetric matrix."""
    X = np.asarray(X, dtype=float)
    k = X.shape[0]
    iu = np.triu_indices(k)
    scale = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    return X[iu] * scale


def smat(v: np.ndarray, k: int) -> np.ndarray:
    """Inverse of svec for a k-by-k symmetric matrix."""
    v = np.asarray(v, dtype=float)
    iu = np.triu_indices(k)
    scale = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    X = np.zeros((k, k))
    X[iu] = v / scale
    X.T[iu] = X[iu]
    return X


def svec_dim(k: int) -> int:
    return k * (k + 1) // 2


def embed_hermitian(W: np.ndarray) -> np.ndarray:
    """Real symmetric embedding [[Re W, -Im W], [Im W, Re W]] of Hermitian W.

    Each eigenvalue of W appears twice in the embedding, so W >= 0 exactly
    when the embedding is positive semidefinite.
    """
    W = np.asarray(W)
    R, I = W.real, W.imag
    return np.block([[R, -I], [I, R]])


def eigengap_rank(W: np.ndarray, ratio: float = 1e4) -> int:
    """Numerical rank of a PSD matrix by the first large eigenvalue gap.

    Eigenvalues are sorted descending and small negatives (round-off) are
    clamped to zero.  The rank is the smallest k with lam[k-1]/lam[k] > ratio,
    where the eigenvalue after the last is treated as 0 (infinite ratio).
    Returns the full dimension when no gap exceeds the ratio, and 0 for the
    zero matrix.
    """
    W = np.asarray(W)
    lam = np.linalg.eigvalsh((W + W.conj().T) / 2.0)[::-1].copy()
    if lam.size == 0:
        return 0
    lam[lam < 0.0] = 0.0
    if lam[0] == 0.0:
        return 0
    tail = np.append(lam[1:], 0.0)
    for k in range(lam.size):
        nxt = tail[k]
        if nxt <= 0.0:
            return k + 1 if lam[k] > 0.0 else k
        if lam[k] / nxt > ratio:
            return k + 1
    return lam.size


@dataclass
class ConeBlock:
    """One affine-map-into-cone constraint block.

    For kind "psd", size is the matrix side k and A/b live in svec space
    (svec_dim(k) rows); otherwise size is the embedded vector dimension.
    """

    kind: str
    size: int
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float).ravel()
        rows = svec_dim(self.size) if self.kind == PSD else self.size
        if self.A.shape[0] != rows or self.b.shape[0] != rows:
            raise ValueError(
                f"block rows mismatch: kind={self.kind} size={self.size} "
                f"A={self.A.shape} b={self.b.shape}"
            )

    @property
    def rows(self) -> int:
        return self.b.shape[0]

    def value(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x + self.b

    def residual(self, x: np.ndarray) -> float:
        """Distance-like violation of the cone membership at x (0 if inside)."""
        v = self.value(x)
        if self.kind == ZERO:
            return float(np.max(np.abs(v), initial=0.0))
        if self.kind == NONNEG:
            return float(max(0.0, -np.min(v, initial=0.0)))
        if self.kind == SOC:
            return float(max(0.0, np.linalg.norm(v[1:]) - v[0]))
        if self.kind == PSD:
            lam = np.linalg.eigvalsh(smat(v, self.size))
            return float(max(0.0, -lam[0]))
        raise ValueError(f"unknown cone kind {self.kind}")


@dataclass
class ConicProgram:
    """Linear objective plus affine-into-cone constraint blocks."""

    n: int
    c: np.ndarray
    blocks: List[ConeBlock]
    names: Optional[List[str]] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        if self.c.shape[0] != self.n:
            raise ValueError("objective length does not match variable count")
        for blk in self.blocks:
            if blk.A.shape[1] != self.n:
                raise ValueError("block column count does not match variables")

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x)

    def residuals(self, x: np.ndarray) -> List[float]:
        return [blk.residual(x) for blk in self.blocks]


@dataclass
class SolverConfig:
    tol: float = 1e-8
    # Accuracy still accepted when the iteration stalls at its numerical
    # floor before reaching tol.
    tol_relaxed: float = 3e-5
    max_iter: int = 200
    step_frac: float = 0.99


@dataclass
class Solution:
    status: str
    x: Optional[np.ndarray] = None
    obj: Optional[float] = None
    obj_dual: Optional[float] = None
    iterations: int = 0
    block_residuals: Optional[List[float]] = None
    # Dual variables per block (cone blocks) resp. equality multipliers; for
    # status "infeasible" these hold the normalized infeasibility certificate,
    # for "unbounded" x holds the unbounded ray.
    duals: Optional[List[np.ndarray]] = None
    tau: float = float("nan")
    kappa: float = float("nan")
    message: str = ""


class HermitianVariable:
    """Real parametrization of an L-by-L complex Hermitian matrix.

    Coordinates: first the L real diagonal entries, then (Re, Im) pairs of
    the strict upper triangle in row-major order; n = L**2 total.
    """

    def __init__(self, L: int):
        self.L = L
        self.n = L * L
        self._basis = []
        for i in range(L):
            B = np.zeros((L, L), dtype=complex)
            B[i, i] = 1.0
            self._basis.append(B)
        for i in range(L):
            for j in range(i + 1, L):
                B = np.zeros((L, L), dtype=complex)
                B[i, j] = 1.0
                B[j, i] = 1.0
                self._basis.append(B)
                B = np.zeros((L, L), dtype=complex)
                B[i, j] = 1.0j
                B[j, i] = -1.0j
                self._basis.append(B)

    @property
    def basis(self) -> List[np.ndarray]:
        return self._basis

    def to_matrix(self, u: np.ndarray) -> np.ndarray:
        W = np.zeros((self.L, self.L), dtype=complex)
        for uj, B in zip(u, self._basis):
            W += uj * B
        return W

    def from_matrix(self, W: np.ndarray) -> np.ndarray:
        W = np.asarray(W)
        L = self.L
        u = np.empty(self.n)
        u[:L] = W.diagonal().real
        k = L
        for i in range(L):
            for j in range(i + 1, L):
                u[k] = W[i, j].real
                u[k + 1] = W[i, j].imag
                k += 2
        return u

    def lin_coeffs(self, T: np.ndarray) -> np.ndarray:
        """Coefficients a with a @ u == Re trace(T^H W(u))."""
        return np.array([np.real(np.vdot(T, B)) for B in self._basis])

    def psd_block_rows(self) -> np.ndarray:
        """Columns are svec(embed_hermitian(B_j)); rows span svec(2L)."""
        cols = [svec(embed_hermitian(B)) for B in self._basis]
        return np.column_stack(cols)

    def apply(self, fn: Callable[[np.ndarray], np.ndarray]) -> List[np.ndarray]:
        """Evaluate a linear matrix function on every basis element."""
        return [fn(B) for B in self._basis]
