"""Rank-one weight recovery from a relaxed design matrix.

The design programs optimize over a PSD matrix standing in for w w^H.
When the optimum is numerically rank-one the weight vector is read off
the dominant eigenpair.  Otherwise candidates are drawn from CN(0, W),
each rescaled by the smallest factor that restores the deterministic
safe constraint, and the cheapest feasible candidate wins.  Because
every margin is affine in W with constant part -sigma_v2, that minimal
factor has the closed form t = sigma_v2 / (margin(W) + sigma_v2).
"""

import math
from dataclasses import dataclass

import numpy as np

from . import model
from .conic import eigengap_rank

EIG_RANK_ONE = "eig-rank-one"
RANDOMIZED = "randomized"

# keeps randomization draws off the channel / perturbation streams
_RAND_TAG = 0x8D1


class NoFeasibleCandidate(RuntimeError):
    """No randomized candidate admitted a finite feasibility rescaling."""


@dataclass(frozen=True)
class ExtractionResult:
    w: np.ndarray
    power: float
    n_feasible: int
    source: str
    scale: float


def extract(W_opt: np.ndarray, checker, n_samples: int = 1000,
            seed: model.Seed = 0) -> ExtractionResult:
    """Recover a feasible weight vector from a relaxed optimum.

    checker is any of the design-constraint objects; it supplies the
    scenario and parameters as well as margin / min_scale.  For
    numerically rank-one W_opt no sampling happens and n_feasible is 0.
    """
    W = model.hermitize(np.asarray(W_opt, dtype=complex))
    pm = model.average_power_matrix(checker.sc, checker.params)

    if eigengap_rank(W) == 1:
        lam, V = np.linalg.eigh(W)
        w = np.sqrt(max(lam[-1], 0.0)) * V[:, -1]
        Wr = np.outer(w, w.conj())
        t = 1.0 if checker.margin(Wr) >= 0.0 else checker.min_scale(Wr)
        if math.isfinite(t):
            w = w * np.sqrt(t)
            return ExtractionResult(
                w=w,
                power=model.hdot(pm, np.outer(w, w.conj())),
                n_feasible=0,
                source=EIG_RANK_ONE,
                scale=t,
            )

    lam, V = np.linalg.eigh(W)
    factor = V * np.sqrt(np.clip(lam, 0.0, None))
    rng = model.stream(seed, _RAND_TAG)
    Z = model.complex_normal(rng, n_samples, W.shape[0])
    cands = Z @ factor.T

    best = None
    n_feasible = 0
    for j in range(n_samples):
        wj = cands[j]
        Wj = np.outer(wj, wj.conj())
        t = checker.min_scale(Wj)
        if not math.isfinite(t):
            continue
        n_feasible += 1
        power = t * model.hdot(pm, Wj)
        if best is None or power < best[0]:
            best = (power, wj, t)
    if best is None:
        raise NoFeasibleCandidate(
            f"none of {n_samples} randomized candidates was rescalable")
    power, wj, t = best
    w = wj * np.sqrt(t)
    return ExtractionResult(
        w=w,
        power=model.hdot(pm, np.outer(w, w.conj())),
        n_feasible=n_feasible,
        source=RANDOMIZED,
        scale=t,
    )
