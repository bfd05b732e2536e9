"""Shared builders for the test suite."""

import numpy as np

from relaysafe import model
from relaysafe.conic import solver
from relaysafe.conic.program import OPTIMAL


def make_case(L=4, channel=0, eps2=0.002, eta2=None, seed=2024, p_t=10.0,
              gamma_db=18.0, rho=0.1, sigma2=0.25, sigma_v2=0.25):
    """One seeded channel scenario plus its parameters."""
    if eta2 is None:
        eta2 = eps2
    params = model.SystemParams(
        L=L, p_t=p_t, gamma=10.0 ** (gamma_db / 10.0), rho=rho,
        sigma_v2=sigma_v2, sigma2=sigma2)
    sc = model.sample_channel(params, (seed, channel),
                              eps=float(np.sqrt(eps2)), eta=float(np.sqrt(eta2)))
    return sc, params


def solve_ok(prog, **kw):
    sol = solver.solve(prog, **kw)
    assert sol.status == OPTIMAL, f"{sol.status}: {sol.message}"
    return sol


def rand_herm(rng, L, scale=1.0):
    A = rng.standard_normal((L, L)) + 1j * rng.standard_normal((L, L))
    return scale * (A + A.conj().T) / 2.0


def rand_psd(rng, L, scale=1.0):
    A = rng.standard_normal((L, L)) + 1j * rng.standard_normal((L, L))
    return scale * (A @ A.conj().T) / L


def rand_pert(rng, L):
    x = (rng.standard_normal(L) + 1j * rng.standard_normal(L)) / np.sqrt(2.0)
    y = (rng.standard_normal(L) + 1j * rng.standard_normal(L)) / np.sqrt(2.0)
    return model.Perturbation(x=x, y=y)


def rel_err(a, b):
    return abs(a - b) / max(1.0, abs(a), abs(b))
