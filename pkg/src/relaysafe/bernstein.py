"""Bernstein-tail convex restriction of the quadratic outage constraint.

Working with the degree-two truncation of the SNR satisfaction margin,
written over the standardized real Gaussian vector

    xi = sqrt(2) [Re x; Im x; Re y; Im y] ~ N(0, I_{4L}),

the margin is margin(xi) = s + v.xi + xi.Rbar.xi with (s + sigma_v2, v,
Rbar) all linear in W.  A Bernstein-type tail bound on indefinite Gaussian
quadratics then gives the deterministic sufficient condition

    tr(Rbar) - 2 sqrt(ln(1/rho)) delta + 2 ln(rho) lambda + s >= 0,
    sqrt(||Rbar||_F^2 + ||v||^2 / 2) <= delta,
    lambda I + Rbar >= 0,  lambda >= 0,

which together with W >= 0 forms the design program built here.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from . import model
from .conic import (
    NONNEG,
    PSD,
    SOC,
    ConeBlock,
    ConicProgram,
    HermitianVariable,
    svec,
    svec_dim,
)
from .model import ChannelScenario, Perturbation, SystemParams


def standardized_vector(pert: Perturbation) -> np.ndarray:
    """Map a complex error pair to the unit-covariance real vector."""
    return math.sqrt(2.0) * np.concatenate(
        [pert.x.real, pert.x.imag, pert.y.real, pert.y.imag])


def standardized_batch(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Row-wise standardized_vector: (n, L) complex pairs -> (n, 4L) real."""
    return math.sqrt(2.0) * np.concatenate(
        [X.real, X.imag, Y.real, Y.imag], axis=1)


@dataclass
class QuadraticForm:
    """Real quadratic s + v.xi + xi.Rbar.xi with its building blocks kept."""

    s: float
    v: np.ndarray
    R_bar: np.ndarray
    blocks: Dict[str, np.ndarray] = field(default_factory=dict)

    def eval(self, xi: np.ndarray) -> float:
        return float(self.s + self.v @ xi + xi @ self.R_bar @ xi)

    def eval_batch(self, Xi: np.ndarray) -> np.ndarray:
        return self.s + Xi @ self.v + np.einsum("ni,ij,nj->n", Xi, self.R_bar, Xi)


def _rotation_block(A: np.ndarray) -> np.ndarray:
    """[[Re A, Im A], [-Im A, Re A]], the real form of a complex sesquilinear block."""
    return np.block([[A.real, A.imag], [-A.imag, A.real]])


def margin_quadratic(W: np.ndarray, sc: ChannelScenario,
                     params: SystemParams) -> QuadraticForm:
    """Decompose the truncated satisfaction margin over xi for a fixed W.

    The constant is the estimated-channel margin (so W = 0 gives
    -sigma_v2); the linear and quadratic coefficients come out in closed
    form from the channel structure.  Cross-checked in tests against the
    second-order centered-matrix route, which must give identical values.
    """
    f, g = sc.f_bar, sc.g_bar
    eps, eta = sc.eps, sc.eta
    pg = params.p_t / params.gamma
    L = sc.L

    s = model.nominal_margin(W, sc, params)

    # m = W(f o g*) drives both the linear term and the cross blocks.
    m = W @ (f * np.conj(g))
    d = g * m                        # signal slope against x
    e = f * np.conj(m)               # signal slope against y
    noise_slope = params.sigma2 * np.real(np.diag(W)) * g
    v = math.sqrt(2.0) * np.concatenate([
        eps * pg * d.real,
        eps * pg * d.imag,
        eta * (pg * e.real - noise_slope.real),
        eta * (pg * e.imag - noise_slope.imag),
    ])

    G = np.conj(g)[:, None] * g[None, :]
    F_conj = np.conj(f)[:, None] * f[None, :]
    K1 = _rotation_block(np.conj(W) * G)
    K42 = _rotation_block(W * F_conj)
    sigw = params.sigma2 * np.real(np.diag(W))
    K41 = np.diag(np.concatenate([sigw, sigw]))
    Z = W * (g[:, None] * f[None, :])
    K2 = np.block([
        [np.diag(m.real) + Z.real, -np.diag(m.imag) + Z.imag],
        [np.diag(m.imag) + Z.imag, np.diag(m.real) - Z.real],
    ])
    K3 = K2.T

    R = 0.5 * np.block([
        [eps**2 * pg * K1, eps * eta * pg * K2],
        [eps * eta * pg * K3, -eta**2 * K41 + eta**2 * pg * K42],
    ])
    R_bar = (R + R.T) / 2.0
    return QuadraticForm(s=float(s), v=v, R_bar=R_bar,
                         blocks={"K1": K1, "K2": K2, "K3": K3,
                                 "K41": K41, "K42": K42})


class BernsteinConstraint:
    """Deterministic checker for the Bernstein-restricted margin.

    margin(W) maximizes over the auxiliary variables in closed form:
    delta = sqrt(||Rbar||_F^2 + ||v||^2/2) and lambda = max(0, -lam_min(Rbar)).
    Scaling behaves as margin(tW) = t (margin(W) + sigma_v2) - sigma_v2,
    which yields the same minimal-rescue formula as the moment designs.
    """

    def __init__(self, sc: ChannelScenario, params: SystemParams):
        self.sc = sc
        self.params = params
        self.sqrt_log = math.sqrt(math.log(1.0 / params.rho))

    def margin(self, W: np.ndarray) -> float:
        qf = margin_quadratic(W, self.sc, self.params)
        delta = math.sqrt(np.sum(qf.R_bar**2) + 0.5 * float(qf.v @ qf.v))
        lam = max(0.0, -float(np.linalg.eigvalsh(qf.R_bar)[0]))
        return (float(np.trace(qf.R_bar)) - 2.0 * self.sqrt_log * delta
                + 2.0 * math.log(self.params.rho) * lam + qf.s)

    def min_scale(self, W: np.ndarray) -> float:
        lin = self.margin(W) + self.params.sigma_v2
        if lin <= 0.0:
            return math.inf
        return self.params.sigma_v2 / lin


@dataclass
class BernsteinProblem:
    """Design program plus the bookkeeping needed to read a solution back."""

    program: ConicProgram
    var: HermitianVariable
    lam_index: int
    delta_index: int
    rho: float
    scenario_tag: str


def _scenario_tag(sc: ChannelScenario) -> str:
    h = hashlib.sha256()
    for arr in (sc.f_bar, sc.g_bar):
        h.update(np.ascontiguousarray(arr).tobytes())
    h.update(np.float64(sc.eps).tobytes())
    h.update(np.float64(sc.eta).tobytes())
    return h.hexdigest()[:16]


def bernstein_design_program(sc: ChannelScenario,
                             params: SystemParams) -> BernsteinProblem:
    """Power-minimizing program under the Bernstein restriction.

    Variables: L^2 real coordinates of W, then lambda, then delta.  Blocks:
    the scalar tail inequality, one SOC of dimension 1 + (4L)^2 + 4L
    bounding delta, a PSD block of size 4L for lambda I + Rbar, lambda >= 0,
    and the real embedding of W >= 0.
    """
    L = params.L
    var = HermitianVariable(L)
    n = var.n + 2
    lam_i, delta_i = var.n, var.n + 1

    c = np.zeros(n)
    c[:var.n] = var.lin_coeffs(model.average_power_matrix(sc, params))

    forms = [margin_quadratic(B, sc, params) for B in var.basis]
    log_rho = math.log(params.rho)

    # tr(Rbar) + s is linear in W; the -sigma_v2 offset rides on b.
    tail = np.zeros((1, n))
    for j, qf in enumerate(forms):
        tail[0, j] = np.trace(qf.R_bar) + (qf.s + params.sigma_v2)
    tail[0, lam_i] = 2.0 * log_rho
    tail[0, delta_i] = -2.0 * math.sqrt(-log_rho)
    tail_b = np.array([-params.sigma_v2])

    m = 4 * L
    soc_rows = 1 + m * m + m
    soc_A = np.zeros((soc_rows, n))
    soc_A[0, delta_i] = 1.0
    for j, qf in enumerate(forms):
        soc_A[1:1 + m * m, j] = qf.R_bar.reshape(-1)
        soc_A[1 + m * m:, j] = qf.v / math.sqrt(2.0)

    psd_rows = svec_dim(m)
    psd_A = np.zeros((psd_rows, n))
    for j, qf in enumerate(forms):
        psd_A[:, j] = svec(qf.R_bar)
    psd_A[:, lam_i] = svec(np.eye(m))

    lam_A = np.zeros((1, n))
    lam_A[0, lam_i] = 1.0

    w_A = np.zeros((svec_dim(2 * L), n))
    w_A[:, :var.n] = var.psd_block_rows()

    blocks = [
        ConeBlock(NONNEG, 1, tail, tail_b),
        ConeBlock(SOC, soc_rows, soc_A, np.zeros(soc_rows)),
        ConeBlock(PSD, m, psd_A, np.zeros(psd_rows)),
        ConeBlock(NONNEG, 1, lam_A, np.zeros(1)),
        ConeBlock(PSD, 2 * L, w_A, np.zeros(svec_dim(2 * L))),
    ]
    prog = ConicProgram(n=n, c=c, blocks=blocks)
    return BernsteinProblem(program=prog, var=var, lam_index=lam_i,
                            delta_index=delta_i, rho=params.rho,
                            scenario_tag=_scenario_tag(sc))
