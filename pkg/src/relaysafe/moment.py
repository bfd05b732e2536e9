"""Moment-based convex restrictions of the outage constraint.

The SNR violation functional shifted by its value at the estimated channel,

    centered(W, x, y) = snr_deficit(W, x, y) + nominal_margin(W),

is linear in W:  centered = Re <vec(W), vec(M(x, y))>  for an explicit
Hermitian matrix polynomial M of degree four in the errors (order=4) or its
degree-two truncation (order=2).  A Markov/moment tail bound then turns

    Pr(outage) <= rho    into    nominal_margin(W) >= factor(rho) * sqrt(E[centered^2]),

and E[centered^2] = vec(W)^H U vec(W) with U assembled in closed form from
Wick contractions of the Gaussian errors.  The resulting program is a
second-order-cone constraint plus W >= 0, i.e. convex in W.

The closed-form U drops the centered-square components (|x_i|^2 - 1 and
friends) that only hit the diagonal-pair entries; they are of fourth order
in the error scales and are covered by the Monte-Carlo guard test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import model
from .conic import (
    NONNEG,
    PSD,
    SOC,
    ConeBlock,
    ConicProgram,
    HermitianVariable,
)
from .model import ChannelScenario, Perturbation, SystemParams, hdot


def tail_order(rho: float) -> float:
    """Moment order q minimizing the Markov bound; 2 unless rho <= exp(-8)."""
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    if rho <= math.exp(-8.0):
        lr = math.log(rho)
        return (-lr + math.sqrt(lr * lr - 8.0 * lr)) / 4.0
    return 2.0


def tail_factor(rho: float) -> float:
    """Multiplier on sqrt(E[centered^2]) making the margin constraint safe."""
    q = tail_order(rho)
    if q > 2.0:
        return (q - 1.0) ** 2 * math.exp(2.0 * q / (q - 1.0))
    return 1.0 / math.sqrt(rho)


def centered_deficit_matrix(pert: Perturbation, sc: ChannelScenario,
                            params: SystemParams, order: int = 4) -> np.ndarray:
    """Hermitian M(x, y) with Re<vec(W), vec(M)> = centered deficit.

    order=4 is exact; order=2 keeps only terms of total degree <= 2 in
    (x, y).  M(0, 0) = 0 for both orders.
    """
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    f, g = sc.f_bar, sc.g_bar
    x, y = pert.x, pert.y
    eps, eta = sc.eps, sc.eta
    pg = params.p_t / params.gamma

    ff = f[:, None] * np.conj(f)[None, :]           # f_k conj(f_l)
    gg_cc = np.conj(g)[:, None] * g[None, :]        # conj(g_k) g_l
    xf = x[:, None] * np.conj(f)[None, :] + f[:, None] * np.conj(x)[None, :]
    yg = np.conj(y)[:, None] * g[None, :] + np.conj(g)[:, None] * y[None, :]
    yy = np.conj(y)[:, None] * y[None, :]
    xx = x[:, None] * np.conj(x)[None, :]

    signal = eta * ff * yg + eps * gg_cc * xf
    signal = signal + eta**2 * ff * yy + eps**2 * gg_cc * xx + eps * eta * xf * yg
    if order == 4:
        signal = signal + eps * eta**2 * xf * yy + eta * eps**2 * xx * yg
        signal = signal + eps**2 * eta**2 * xx * yy

    M = -pg * signal
    # Relay-noise contribution only touches the diagonal.
    diag_noise = (
        eta * params.sigma2 * 2.0 * np.real(y * np.conj(g))
        + eta**2 * params.sigma2 * np.abs(y) ** 2
    )
    M[np.diag_indices_from(M)] += diag_noise
    return model.hermitize(M)


def centered_deficit_batch(X: np.ndarray, Y: np.ndarray, sc: ChannelScenario,
                           params: SystemParams, order: int = 4) -> np.ndarray:
    """Vectorized centered_deficit_matrix over rows of (X, Y): (n, L, L)."""
    f, g = sc.f_bar, sc.g_bar
    eps, eta = sc.eps, sc.eta
    pg = params.p_t / params.gamma
    L = sc.L

    ff = (f[:, None] * np.conj(f)[None, :])[None, :, :]
    gg_cc = (np.conj(g)[:, None] * g[None, :])[None, :, :]
    xf = X[:, :, None] * np.conj(f)[None, None, :] + f[None, :, None] * np.conj(X)[:, None, :]
    yg = np.conj(Y)[:, :, None] * g[None, None, :] + np.conj(g)[None, :, None] * Y[:, None, :]
    yy = np.conj(Y)[:, :, None] * Y[:, None, :]
    xx = X[:, :, None] * np.conj(X)[:, None, :]

    signal = eta * ff * yg + eps * gg_cc * xf
    signal = signal + eta**2 * ff * yy + eps**2 * gg_cc * xx + eps * eta * xf * yg
    if order == 4:
        signal = signal + eps * eta**2 * xf * yy + eta * eps**2 * xx * yg
        signal = signal + eps**2 * eta**2 * xx * yy

    M = -pg * signal
    idx = np.arange(L)
    diag_noise = (
        eta * params.sigma2[None, :] * 2.0 * np.real(Y * np.conj(g)[None, :])
        + eta**2 * params.sigma2[None, :] * np.abs(Y) ** 2
    )
    M[:, idx, idx] += diag_noise
    return (M + np.conj(np.swapaxes(M, 1, 2))) / 2.0


@dataclass
class WickCoefficients:
    """Closed-form contraction coefficients of the centered deficit.

    diag has shape (L, 9): coefficients of the monomials
    {conj(y_i), y_i, x_i, conj(x_i), x_i conj(y_i), x_i y_i, conj(x_i y_i),
    conj(x_i) y_i, 1} in the diagonal entry M_ii after folding |.|^2
    contractions; offdiag has shape (L, L, n) with n = 15 (order 4) or
    10 (order 2): exact monomial coefficients of M_kl, k != l.
    """

    order: int
    diag: np.ndarray
    offdiag: np.ndarray


def wick_coefficients(sc: ChannelScenario, params: SystemParams,
                      order: int = 4) -> WickCoefficients:
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    f, g = sc.f_bar, sc.g_bar
    eps, eta = sc.eps, sc.eta
    pg = params.p_t / params.gamma
    sig2 = params.sigma2
    L = sc.L
    full = order == 4

    C = np.zeros((L, 9), dtype=complex)
    absf2 = np.abs(f) ** 2
    absg2 = np.abs(g) ** 2
    C[:, 0] = eta * sig2 * g - pg * (eta * absf2 * g + (eta * eps**2 * g if full else 0.0))
    C[:, 1] = eta * sig2 * np.conj(g) - pg * (eta * absf2 * np.conj(g)
                                              + (eta * eps**2 * np.conj(g) if full else 0.0))
    C[:, 2] = -pg * (eps * absg2 * np.conj(f) + (eps * eta**2 * np.conj(f) if full else 0.0))
    C[:, 3] = -pg * (eps * absg2 * f + (eps * eta**2 * f if full else 0.0))
    C[:, 4] = -pg * eps * eta * np.conj(f) * g
    C[:, 5] = -pg * eps * eta * np.conj(f) * np.conj(g)
    C[:, 6] = -pg * eps * eta * f * g
    C[:, 7] = -pg * eps * eta * f * np.conj(g)
    C[:, 8] = eta**2 * sig2 - pg * (eta**2 * absf2 + eps**2 * absg2
                                    + (eps**2 * eta**2 if full else 0.0))

    nD = 15 if full else 10
    D = np.zeros((L, L, nD), dtype=complex)
    fk = f[:, None]
    fl_c = np.conj(f)[None, :]
    gk_c = np.conj(g)[:, None]
    gl = g[None, :]
    D[:, :, 0] = -pg * eta * fk * fl_c * gl          # conj(y_k)
    D[:, :, 1] = -pg * eta * fk * fl_c * gk_c        # y_l
    D[:, :, 2] = -pg * eps * gk_c * gl * fl_c        # x_k
    D[:, :, 3] = -pg * eps * gk_c * gl * fk          # conj(x_l)
    D[:, :, 4] = -pg * eps * eta * fl_c * gl         # x_k conj(y_k)
    D[:, :, 5] = -pg * eps * eta * fl_c * gk_c       # x_k y_l
    D[:, :, 6] = -pg * eps * eta * fk * gl           # conj(x_l y_k)
    D[:, :, 7] = -pg * eps * eta * fk * gk_c         # conj(x_l) y_l
    D[:, :, 8] = -pg * eta**2 * fk * fl_c            # conj(y_k) y_l
    D[:, :, 9] = -pg * eps**2 * gk_c * gl            # x_k conj(x_l)
    if full:
        D[:, :, 10] = -pg * eps * eta**2 * fl_c      # x_k conj(y_k) y_l
        D[:, :, 11] = -pg * eps * eta**2 * fk        # conj(x_l y_k) y_l
        D[:, :, 12] = -pg * eps**2 * eta * gl        # x_k conj(x_l y_k)
        D[:, :, 13] = -pg * eps**2 * eta * gk_c      # x_k conj(x_l) y_l
        D[:, :, 14] = -pg * eps**2 * eta**2 * np.ones((L, L))
    idx = np.arange(L)
    D[idx, idx, :] = 0.0                             # diagonal handled by C
    return WickCoefficients(order=order, diag=C, offdiag=D)


@dataclass
class SecondMoment:
    """E[vec(M) vec(M)^H] in closed form, with a PSD square root.

    Indexing matches model.vech (row-major).  Eigenvalues below
    1e-9 * lam_max are clamped to zero before the square root; the clamp
    count is kept for diagnostics, and anything below -1e-6 * lam_max
    raises since it would indicate a transcription bug.
    """

    matrix: np.ndarray
    sqrt: np.ndarray
    clamped: int
    min_eig: float


def second_moment_matrix(coeffs: WickCoefficients) -> SecondMoment:
    C, D = coeffs.diag, coeffs.offdiag
    L = C.shape[0]
    n = L * L

    def vidx(i: int, j: int) -> int:
        return i * L + j

    U = np.zeros((n, n), dtype=complex)
    # Pairs of monomials shared between a diagonal entry M_ii and an
    # off-diagonal one: rows {0,2,4} share conj(y_i)/x_i/x_i conj(y_i) with
    # M_il, rows {1,3,7} share y_i/conj(x_i)/conj(x_i) y_i with M_ki.
    row_share = (0, 2, 4)
    col_share = (1, 3, 7)
    for i in range(L):
        for j in range(L):
            for k in range(L):
                for l in range(L):
                    if i == j and k == l:
                        val = C[i] @ np.conj(C[k]) if i == k else C[i, 8] * np.conj(C[k, 8])
                    elif i == j and k != l:
                        if i == k:
                            val = sum(C[i, m] * np.conj(D[i, l, m]) for m in row_share)
                        elif i == l:
                            val = sum(C[i, m] * np.conj(D[k, i, m]) for m in col_share)
                        else:
                            continue
                    elif i != j and k == l:
                        if i == k:
                            val = sum(D[i, j, m] * np.conj(C[i, m]) for m in row_share)
                        elif j == k:
                            val = sum(D[i, j, m] * np.conj(C[j, m]) for m in col_share)
                        else:
                            continue
                    else:
                        if i == k and j == l:
                            val = D[i, j] @ np.conj(D[i, j])
                        elif i == k:
                            val = sum(D[i, j, m] * np.conj(D[i, l, m]) for m in row_share)
                        elif j == l:
                            val = sum(D[i, j, m] * np.conj(D[k, j, m]) for m in col_share)
                        else:
                            continue
                    U[vidx(i, j), vidx(k, l)] = val

    U = model.hermitize(U)
    lam, V = np.linalg.eigh(U)
    lam_max = float(lam[-1]) if lam.size else 0.0
    min_eig = float(lam[0]) if lam.size else 0.0
    if lam_max > 0.0 and min_eig < -1e-6 * lam_max:
        raise ValueError(
            f"second-moment matrix indefinite: min eig {min_eig:.3e} "
            f"vs max {lam_max:.3e}; coefficient transcription bug likely"
        )
    clamp_mask = lam < 1e-9 * lam_max
    clamped = int(np.sum(clamp_mask))
    lam = np.where(clamp_mask, 0.0, lam)
    sqrtU = (V * np.sqrt(lam)) @ V.conj().T
    return SecondMoment(matrix=U, sqrt=model.hermitize(sqrtU),
                        clamped=clamped, min_eig=min_eig)


class MomentConstraint:
    """Deterministic safe constraint: margin(W) >= 0 implies the outage bound.

    margin(W) = nominal_margin(W) - factor(rho) * ||sqrt(U) vec(W)||.
    Positively homogeneous apart from the -sigma_v2 constant, which gives
    the closed-form minimal feasibility rescaling used after randomization.
    """

    def __init__(self, sc: ChannelScenario, params: SystemParams, order: int = 4):
        self.sc = sc
        self.params = params
        self.order = order
        self.factor = tail_factor(params.rho)
        if sc.eps == 0.0 and sc.eta == 0.0:
            self.second_moment: Optional[SecondMoment] = None
        else:
            self.second_moment = second_moment_matrix(wick_coefficients(sc, params, order))

    def _norm_term(self, W: np.ndarray) -> float:
        if self.second_moment is None:
            return 0.0
        return float(np.linalg.norm(self.second_moment.sqrt @ model.vech(W)))

    def margin(self, W: np.ndarray) -> float:
        return model.nominal_margin(W, self.sc, self.params) - self.factor * self._norm_term(W)

    def min_scale(self, W: np.ndarray) -> float:
        """Smallest t > 0 with margin(t W) >= 0, or inf if none exists."""
        lin = self.margin(W) + self.params.sigma_v2
        if lin <= 0.0:
            return math.inf
        return self.params.sigma_v2 / lin


def moment_design_program(sc: ChannelScenario, params: SystemParams,
                          order: int = 4) -> Tuple[ConicProgram, HermitianVariable]:
    """Power-minimizing conic program under the moment restriction.

    Variables are the L^2 real coordinates of Hermitian W.  Blocks: one SOC
    of real dimension 2 L^2 + 1 tying the nominal margin to the scaled
    second-moment norm (a plain nonnegativity row when eps = eta = 0), and
    one PSD block for W >= 0 through the real embedding.
    """
    L = params.L
    var = HermitianVariable(L)
    cons = MomentConstraint(sc, params, order)

    c = var.lin_coeffs(model.average_power_matrix(sc, params))

    margin_row = np.array([model.nominal_margin(B, sc, params) + params.sigma_v2
                           for B in var.basis])
    blocks = []
    if cons.second_moment is None:
        blocks.append(ConeBlock(NONNEG, 1, margin_row.reshape(1, -1),
                                np.array([-params.sigma_v2])))
    else:
        S = cons.second_moment.sqrt
        cols = []
        for B in var.basis:
            v = S @ model.vech(B)
            cols.append(np.concatenate([v.real, v.imag]))
        soc_A = np.vstack([margin_row, cons.factor * np.column_stack(cols)])
        soc_b = np.zeros(2 * L * L + 1)
        soc_b[0] = -params.sigma_v2
        blocks.append(ConeBlock(SOC, 2 * L * L + 1, soc_A, soc_b))
    blocks.append(ConeBlock(PSD, 2 * L, var.psd_block_rows(),
                            np.zeros((2 * L) * (2 * L + 1) // 2)))
    return ConicProgram(n=var.n, c=c, blocks=blocks), var


class NonrobustConstraint:
    """Margin at the estimated channel only (all error terms discarded)."""

    def __init__(self, sc: ChannelScenario, params: SystemParams):
        self.sc = sc.without_errors()
        self.params = params

    def margin(self, W: np.ndarray) -> float:
        return model.nominal_margin(W, self.sc, self.params)

    def min_scale(self, W: np.ndarray) -> float:
        lin = self.margin(W) + self.params.sigma_v2
        if lin <= 0.0:
            return math.inf
        return self.params.sigma_v2 / lin


def nonrobust_design_program(sc: ChannelScenario, params: SystemParams
                             ) -> Tuple[ConicProgram, HermitianVariable]:
    """Perturbation-free design: moment program of a zero-error scenario."""
    return moment_design_program(sc.without_errors(), params, order=2)
