"""Conic program IR and the built-in interior-point solver."""

from .program import (
    INFEASIBLE,
    MAX_ITER,
    NONNEG,
    NUMERICAL_FAILURE,
    OPTIMAL,
    PSD,
    SOC,
    UNBOUNDED,
    ZERO,
    ConeBlock,
    ConicProgram,
    HermitianVariable,
    Solution,
    SolverConfig,
    eigengap_rank,
    embed_hermitian,
    smat,
    svec,
    svec_dim,
)
from .solver import solve

__all__ = [
    "ConeBlock",
    "ConicProgram",
    "HermitianVariable",
    "Solution",
    "SolverConfig",
    "eigengap_rank",
    "embed_hermitian",
    "smat",
    "svec",
    "svec_dim",
    "solve",
    "ZERO",
    "NONNEG",
    "SOC",
    "PSD",
    "OPTIMAL",
    "INFEASIBLE",
    "UNBOUNDED",
    "MAX_ITER",
    "NUMERICAL_FAILURE",
]
