"""Conservatism comparison of the two safe-approximation routes.

Both restrictions bound the same tail Pr(Q(xi) >= t) <= rho for a real
Gaussian quadratic Q(xi) = xi' A xi + a' xi, xi ~ N(0, I).  The moment
route needs t >= c(rho) sqrt(E[Q^2]); the Bernstein route needs t to
exceed a trace / Frobenius / top-eigenvalue combination.  On a small
rho-window the moment threshold provably dominates the Bernstein one,
i.e. the moment restriction is the more conservative of the two.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .moment import tail_factor

# rho-interval on which moment-route dominance is guaranteed
WINDOW_LO = float(np.exp(-8.0))
WINDOW_HI = 0.00045


@dataclass(frozen=True)
class GaussianQuadratic:
    """Quadratic form in a standard Gaussian vector."""

    quad: np.ndarray
    lin: np.ndarray

    def __post_init__(self):
        quad = np.asarray(self.quad, dtype=float)
        lin = np.asarray(self.lin, dtype=float).ravel()
        if quad.ndim != 2 or quad.shape[0] != quad.shape[1]:
            raise ValueError("quadratic coefficient must be a square matrix")
        if lin.shape[0] != quad.shape[0]:
            raise ValueError("linear coefficient length must match")
        scale = max(1.0, float(np.abs(quad).max(initial=0.0)))
        if np.abs(quad - quad.T).max(initial=0.0) > 1e-12 * scale:
            raise ValueError("quadratic coefficient must be symmetric")
        object.__setattr__(self, "quad", (quad + quad.T) / 2.0)
        object.__setattr__(self, "lin", lin)

    @property
    def m(self) -> int:
        return self.quad.shape[0]

    def eval(self, xi: np.ndarray) -> float:
        xi = np.asarray(xi, dtype=float)
        return float(xi @ self.quad @ xi + self.lin @ xi)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n independent draws of Q(xi)."""
        Xi = rng.standard_normal((n, self.m))
        return np.einsum("ni,ij,nj->n", Xi, self.quad, Xi) + Xi @ self.lin


def second_moment(q: GaussianQuadratic) -> float:
    """Exact E[Q(xi)^2] for xi ~ N(0, I).

    E[(xi' A xi)^2] = tr(A)^2 + 2 ||A||_F^2 for symmetric A, the cross
    term with the linear part vanishes by symmetry, and the linear part
    contributes ||a||^2.
    """
    tr = float(np.trace(q.quad))
    fro2 = float(np.sum(q.quad * q.quad))
    return float(q.lin @ q.lin) + 2.0 * fro2 + tr * tr


def s_plus(A: np.ndarray) -> float:
    """Positive part of the largest eigenvalue."""
    return max(float(np.linalg.eigvalsh(A)[-1]), 0.0)


def moment_threshold(q: GaussianQuadratic, rho: float) -> float:
    """Smallest t accepted by the moment restriction of Pr(Q >= t) <= rho."""
    if not (0.0 < rho < 1.0):
        raise ValueError("rho must lie in (0, 1)")
    return float(tail_factor(rho) * np.sqrt(second_moment(q)))


def bernstein_threshold(q: GaussianQuadratic, rho: float) -> float:
    """Smallest t accepted by the Bernstein-type restriction."""
    if not (0.0 < rho < 1.0):
        raise ValueError("rho must lie in (0, 1)")
    log_inv = np.log(1.0 / rho)
    fro2 = float(np.sum(q.quad * q.quad))
    dev = np.sqrt(fro2 + 0.5 * float(q.lin @ q.lin))
    return float(np.trace(q.quad) + 2.0 * np.sqrt(log_inv) * dev
                 + 2.0 * log_inv * s_plus(q.quad))


@dataclass(frozen=True)
class DominanceReport:
    moment_threshold: float
    bernstein_threshold: float
    dominated: bool
    rho: float
    in_window: bool


def rho_window() -> Tuple[float, float]:
    """rho-interval with guaranteed moment-over-Bernstein dominance."""
    return (WINDOW_LO, WINDOW_HI)


def check_dominance(q: GaussianQuadratic, rho: float) -> DominanceReport:
    """Compare the two thresholds at one rho.

    dominated means the moment threshold is at least the Bernstein one,
    so every moment-feasible t is Bernstein-feasible.  Inside the
    rho-window this is guaranteed; outside it is merely reported.
    """
    mt = moment_threshold(q, rho)
    bt = bernstein_threshold(q, rho)
    return DominanceReport(
        moment_threshold=mt,
        bernstein_threshold=bt,
        dominated=bool(mt >= bt),
        rho=rho,
        in_window=bool(WINDOW_LO < rho < WINDOW_HI),
    )
