"""Two-hop relay network model: channels, perturbations, SNR, outage.

A source transmits with power p_t through L amplify-and-forward relays to a
destination.  The estimated per-hop channels are f_bar (source->relay) and
g_bar (relay->destination); the true channels are

    f = f_bar + eps * x,    g = g_bar + eta * y,

with x, y standard circularly-symmetric complex Gaussian vectors (real and
imaginary parts i.i.d. N(0, 1/2)).  Relay ell applies weight w_ell and adds
noise of power sigma2[ell]; the destination adds noise sigma_v2.

The SNR target gamma is violated exactly when the quartic polynomial
snr_deficit(W, ...) is >= 0, where W = w w^H (or a relaxation of it).

Randomness policy: all sampling goes through counter-based Philox streams
derived from explicit integer seeds, so every experiment is reproducible
bit-for-bit with a pinned numpy.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Optional, Tuple, Union

import numpy as np

Seed = Union[int, Tuple[int, ...]]


def stream(seed: Seed, *ids: int) -> np.random.Generator:
    """Named, seedable, counter-based random stream."""
    if isinstance(seed, tuple):
        entropy = seed + tuple(ids)
    else:
        entropy = (int(seed),) + tuple(ids)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def complex_normal(rng: np.random.Generator, *shape: int) -> np.ndarray:
    """CN(0, 1) draws: real/imag parts i.i.d. N(0, 1/2)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


@dataclass(frozen=True)
class SystemParams:
    """Static network description; gamma and rho are in linear units."""

    L: int
    p_t: float
    gamma: float
    rho: float
    sigma_v2: float
    sigma2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sigma2", np.broadcast_to(
            np.asarray(self.sigma2, dtype=float), (self.L,)).copy())
        if self.L < 1 or self.p_t <= 0 or self.gamma <= 0:
            raise ValueError("need L >= 1, p_t > 0, gamma > 0")
        if not (0.0 < self.rho < 1.0):
            raise ValueError("outage tolerance rho must lie in (0, 1)")
        if self.sigma_v2 <= 0 or np.any(self.sigma2 <= 0):
            raise ValueError("noise powers must be positive")

    def with_gamma_db(self, gamma_db: float) -> "SystemParams":
        return replace(self, gamma=10.0 ** (gamma_db / 10.0))


@dataclass(frozen=True)
class ChannelScenario:
    """Estimated channels plus deterministic error scales."""

    f_bar: np.ndarray
    g_bar: np.ndarray
    eps: float
    eta: float

    def __post_init__(self):
        object.__setattr__(self, "f_bar", np.asarray(self.f_bar, dtype=complex))
        object.__setattr__(self, "g_bar", np.asarray(self.g_bar, dtype=complex))
        if self.f_bar.shape != self.g_bar.shape or self.f_bar.ndim != 1:
            raise ValueError("f_bar and g_bar must be 1-d of equal length")
        if self.eps < 0 or self.eta < 0:
            raise ValueError("error scales must be nonnegative")

    @property
    def L(self) -> int:
        return self.f_bar.shape[0]

    def without_errors(self) -> "ChannelScenario":
        return replace(self, eps=0.0, eta=0.0)


@dataclass(frozen=True)
class Perturbation:
    """One realization of the normalized channel errors."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=complex))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=complex))
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError("x and y must be 1-d of equal length")

    @classmethod
    def zero(cls, L: int) -> "Perturbation":
        return cls(np.zeros(L, dtype=complex), np.zeros(L, dtype=complex))


def hermitize(M: np.ndarray) -> np.ndarray:
    """Nearest Hermitian matrix (symmetric part)."""
    return (M + M.conj().T) / 2.0


def is_hermitian(M: np.ndarray, tol: float = 1e-12) -> bool:
    scale = max(1.0, float(np.max(np.abs(M), initial=0.0)))
    return bool(np.max(np.abs(M - M.conj().T), initial=0.0) <= tol * scale)


def hdot(A: np.ndarray, B: np.ndarray) -> float:
    """Real Frobenius pairing Re trace(A^H B); plain trace(AB) for Hermitian A."""
    return float(np.real(np.vdot(A, B)))


def vech(W: np.ndarray) -> np.ndarray:
    """Row-major flattening; pairs with the second-moment matrix indexing."""
    return np.asarray(W).reshape(-1)


def sample_channel(params: SystemParams, seed: Seed,
                   eps: float = 0.0, eta: float = 0.0) -> ChannelScenario:
    """Draw estimated channels f_bar, g_bar ~ CN(0, I) for a fresh scenario."""
    rng = stream(seed, 0xC4A)
    f_bar = complex_normal(rng, params.L)
    g_bar = complex_normal(rng, params.L)
    return ChannelScenario(f_bar=f_bar, g_bar=g_bar, eps=eps, eta=eta)


def sample_perturbations(L: int, n: int, seed: Seed) -> Tuple[np.ndarray, np.ndarray]:
    """Batch of n normalized error draws; returns (X, Y) of shape (n, L)."""
    rng = stream(seed, 0x9E7)
    X = complex_normal(rng, n, L)
    Y = complex_normal(rng, n, L)
    return X, Y


def realized_channels(sc: ChannelScenario, pert: Perturbation) -> Tuple[np.ndarray, np.ndarray]:
    return sc.f_bar + sc.eps * pert.x, sc.g_bar + sc.eta * pert.y


def snr(w: np.ndarray, f: np.ndarray, g: np.ndarray, params: SystemParams) -> float:
    """Destination SNR for weights w under true channels (f, g)."""
    h = f * np.conj(g)
    num = params.p_t * abs(np.vdot(w, h)) ** 2
    den = float(np.sum(params.sigma2 * np.abs(g) ** 2 * np.abs(w) ** 2)) + params.sigma_v2
    return num / den


def snr_deficit(W: np.ndarray, pert: Perturbation, sc: ChannelScenario,
                params: SystemParams) -> float:
    """Quartic violation functional: >= 0 exactly when SNR <= gamma.

    Equals sigma_v2 + sum_k sigma2_k |g_k|^2 W_kk - (p_t/gamma) h^H W h
    with h = f * conj(g) at the realized channels.
    """
    f, g = realized_channels(sc, pert)
    h = f * np.conj(g)
    quad = float(np.real(np.vdot(h, W @ h)))
    noise = float(np.real(np.sum(params.sigma2 * np.abs(g) ** 2 * np.diag(W).real)))
    return params.sigma_v2 + noise - (params.p_t / params.gamma) * quad


def snr_deficit_batch(W: np.ndarray, X: np.ndarray, Y: np.ndarray,
                      sc: ChannelScenario, params: SystemParams) -> np.ndarray:
    """Vectorized snr_deficit over rows of (X, Y)."""
    F = sc.f_bar[None, :] + sc.eps * X
    G = sc.g_bar[None, :] + sc.eta * Y
    H = F * np.conj(G)
    quad = np.real(np.einsum("ni,ij,nj->n", np.conj(H), W, H))
    noise = np.abs(G) ** 2 @ (params.sigma2 * np.diag(W).real)
    return params.sigma_v2 + noise - (params.p_t / params.gamma) * quad


def nominal_margin(W: np.ndarray, sc: ChannelScenario, params: SystemParams) -> float:
    """Safety margin at the estimated channels: -snr_deficit at zero error."""
    return -snr_deficit(W, Perturbation.zero(sc.L), sc, params)


def average_power_matrix(sc: ChannelScenario, params: SystemParams) -> np.ndarray:
    """Diagonal matrix whose pairing with W is the mean transmit power.

    Averaging |relay input|^2 over source symbols and channel errors gives
    p_t (|f_bar|^2 + eps^2) + sigma2 on the diagonal.
    """
    d = params.p_t * (np.abs(sc.f_bar) ** 2 + sc.eps**2) + params.sigma2
    return np.diag(d.astype(complex))


def _as_gram(W_or_w: np.ndarray) -> np.ndarray:
    A = np.asarray(W_or_w)
    if A.ndim == 1:
        return np.outer(A, A.conj())
    return A


def outage_rate(W_or_w: np.ndarray, sc: ChannelScenario, params: SystemParams,
                n_samples: int, seed: Seed, mode: str = "exact") -> float:
    """Monte-Carlo outage probability estimate for a fixed design.

    mode "exact" counts snr_deficit >= 0 under the quartic model; mode
    "quadratic" counts nonpositive values of the degree-two margin used by
    the Bernstein-type restriction.
    """
    W = _as_gram(W_or_w)
    X, Y = sample_perturbations(sc.L, n_samples, seed)
    if mode == "exact":
        viol = snr_deficit_batch(W, X, Y, sc, params) >= 0.0
    elif mode == "quadratic":
        from . import bernstein

        qf = bernstein.margin_quadratic(W, sc, params)
        Xi = bernstein.standardized_batch(X, Y)
        viol = qf.eval_batch(Xi) <= 0.0
    else:
        raise ValueError(f"unknown outage mode {mode!r}")
    return float(np.mean(viol))
