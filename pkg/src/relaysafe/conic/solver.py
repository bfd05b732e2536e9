"""Homogeneous self-dual interior-point solver for the conic program IR.

The program blocks are assembled into the standard pair

    (P)  min c'x  s.t.  A x = b,  G x + s = h,  s in K
    (D)  max -b'y - h'z  s.t.  A'y + G'z + c = 0,  z in K*

("zero" blocks become equality rows, the rest populate G with cones K).
The homogeneous embedding in (x, y, z, s, tau, kappa) is driven to
complementarity by a Mehrotra predictor-corrector with Nesterov-Todd
scaling; tau/kappa decide between an optimal solution and an
infeasibility or unboundedness certificate.

Everything is dense and deterministic: one LU factorization of the
symmetric quasidefinite KKT matrix per iteration, three right-hand sides.
"""

from __future__ import annotations

import warnings
from typing import Callable, List, Optional

import numpy as np
import scipy.linalg

from . import cones as _cones
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
    ConicProgram,
    Solution,
    SolverConfig,
)

Backend = Callable[[ConicProgram, SolverConfig], Solution]


def solve(
    prog: ConicProgram,
    config: Optional[SolverConfig] = None,
    backend: Optional[Backend] = None,
) -> Solution:
    """Solve a conic program with the built-in solver or a drop-in backend."""
    config = config or SolverConfig()
    if backend is not None:
        return backend(prog, config)
    sol = _hsd_solve(prog, config)
    if sol.status == OPTIMAL and sol.x is not None:
        sol.block_residuals = prog.residuals(sol.x)
    return sol


def _split_blocks(prog: ConicProgram):
    """Equality rows (zero blocks) and cone rows (G x + s = h, s in K)."""
    eq_A, eq_b = [], []
    G_rows, h_rows, cone_objs, cone_kinds = [], [], [], []
    for blk in prog.blocks:
        if blk.kind == ZERO:
            eq_A.append(blk.A)
            eq_b.append(-blk.b)
        else:
            G_rows.append(-blk.A)
            h_rows.append(blk.b)
            cone_objs.append(_cones.make_cone(blk.kind, blk.size))
            cone_kinds.append(blk.kind)
    n = prog.n
    A = np.vstack(eq_A) if eq_A else np.zeros((0, n))
    b = np.concatenate(eq_b) if eq_b else np.zeros(0)
    G = np.vstack(G_rows) if G_rows else np.zeros((0, n))
    h = np.concatenate(h_rows) if h_rows else np.zeros(0)
    return A, b, G, h, cone_objs, cone_kinds


class _BlockVec:
    """Slicing helper for the concatenated cone variables s and z."""

    def __init__(self, cone_objs):
        self.cones = cone_objs
        self.slices = []
        start = 0
        for cn in cone_objs:
            self.slices.append(slice(start, start + cn.rows))
            start += cn.rows
        self.m = start

    def split(self, v: np.ndarray) -> List[np.ndarray]:
        return [v[s] for s in self.slices]

    def join(self, parts: List[np.ndarray]) -> np.ndarray:
        if not parts:
            return np.zeros(0)
        return np.concatenate(parts)


def _hsd_solve(prog: ConicProgram, config: SolverConfig) -> Solution:
    A, b, G, h, cone_objs, _ = _split_blocks(prog)
    n = prog.n
    p = A.shape[0]
    bv = _BlockVec(cone_objs)
    m = bv.m
    c = prog.c
    deg = sum(cn.degree for cn in cone_objs)

    norm_bh = max(1.0, np.linalg.norm(np.concatenate([b, h])))
    norm_c = max(1.0, np.linalg.norm(c))
    norm_AG = np.linalg.norm(np.vstack([A, G])) if n else 1.0

    x = np.zeros(n)
    y = np.zeros(p)
    s = bv.join([cn.identity() for cn in cone_objs])
    z = s.copy()
    tau, kappa = 1.0, 1.0

    # Best near-optimal and near-certificate iterates seen so far, for
    # reduced-accuracy acceptance when the iteration hits its numerical
    # floor before the full tolerance is met.
    best_opt = None
    best_cert = None

    def bail(status: str, message: str, it: int) -> Solution:
        if best_opt is not None and best_opt[0] <= config.tol_relaxed:
            metric, xh, yh, zh, po, do, t, k = best_opt
            sol = _pack_optimal(prog, xh, yh, bv.split(zh), po, do, it, t, k)
            sol.message = f"optimal at reduced accuracy ({metric:.1e}); {message}"
            return sol
        if best_cert is not None and best_cert[0] <= config.tol_relaxed:
            return Solution(status=INFEASIBLE, duals=bv.split(best_cert[1]),
                            iterations=it, tau=tau, kappa=kappa,
                            message=f"infeasibility certificate at reduced accuracy "
                                    f"({best_cert[0]:.1e}); {message}")
        return Solution(status=status, iterations=it, tau=tau, kappa=kappa,
                        message=message)

    for it in range(config.max_iter):
        r1 = A.T @ y + G.T @ z + c * tau
        r2 = A @ x - b * tau
        r3 = G @ x + s - h * tau
        r4 = float(c @ x + b @ y + h @ z + kappa)
        mu = (s @ z + tau * kappa) / (deg + 1)

        # -- convergence bookkeeping (all quantities at the tau-scaled point);
        # residuals are measured relative to the iterate scale so that
        # near-boundary instances with huge optima still converge
        pres = np.linalg.norm(np.concatenate([r2, r3])) / tau / (
            norm_bh + norm_AG * np.linalg.norm(x) / tau + np.linalg.norm(s) / tau)
        dres = np.linalg.norm(r1) / tau / (
            norm_c + norm_AG * np.linalg.norm(np.concatenate([y, z])) / tau)
        pobj = float(c @ x) / tau
        dobj = -float(b @ y + h @ z) / tau
        gap = float(s @ z) / (tau * tau)
        relgap = gap / max(1.0, abs(pobj), abs(dobj))
        metric = max(pres, dres, relgap)
        if best_opt is None or metric < best_opt[0]:
            best_opt = (metric, x / tau, y / tau, z / tau, pobj, dobj, tau, kappa)
        if pres <= config.tol and dres <= config.tol and relgap <= config.tol:
            duals = bv.split(z / tau)
            return _pack_optimal(prog, x / tau, y / tau, duals, pobj, dobj, it, tau, kappa)

        byhz = float(b @ y + h @ z)
        if byhz < 0.0:
            cert = np.linalg.norm(A.T @ y + G.T @ z) * norm_bh / (-byhz)
            if best_cert is None or cert < best_cert[0]:
                best_cert = (cert, z / (-byhz))
            if cert <= config.tol:
                duals = bv.split(z / (-byhz))
                return Solution(
                    status=INFEASIBLE,
                    duals=duals,
                    iterations=it,
                    tau=tau,
                    kappa=kappa,
                    message="primal infeasibility certificate found",
                )
        ctx = float(c @ x)
        if ctx < 0.0:
            ray_res = np.linalg.norm(np.concatenate([A @ x, G @ x + s])) * norm_c / (-ctx)
            if ray_res <= config.tol:
                return Solution(
                    status=UNBOUNDED,
                    x=x / (-ctx),
                    iterations=it,
                    tau=tau,
                    kappa=kappa,
                    message="unbounded ray found (dual infeasible)",
                )

        # -- Nesterov-Todd scalings and KKT factorization
        s_blks, z_blks = bv.split(s), bv.split(z)
        try:
            scl = [cn.scaling(sb, zb) for cn, sb, zb in zip(cone_objs, s_blks, z_blks)]
            K = np.zeros((n + p + m, n + p + m))
            K[:n, n : n + p] = A.T
            K[n : n + p, :n] = A
            K[:n, n + p :] = G.T
            K[n + p :, :n] = G
            off = n + p
            for cn, sc in zip(cone_objs, scl):
                K[off : off + cn.rows, off : off + cn.rows] = -sc.WtW()
                off += cn.rows
            # Static regularization keeps the factorization nonsingular on
            # degenerate instances; one refinement step removes its bias.
            reg = 1e-11
            idx = np.arange(n + p + m)
            K[idx[:n], idx[:n]] += reg
            K[idx[n:], idx[n:]] -= reg
            with warnings.catch_warnings():
                # A singular factor is recoverable: the resulting non-finite
                # direction trips the guards below and we bail cleanly.
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                lu = scipy.linalg.lu_factor(K, check_finite=False)
            K[idx[:n], idx[:n]] -= reg
            K[idx[n:], idx[n:]] += reg
        except (np.linalg.LinAlgError, ValueError):
            return bail(NUMERICAL_FAILURE, "scaling or factorization failed", it)

        lam_blks = [sc.lam for sc in scl]

        def kkt_solve(bx, by, bz):
            # NaNs are allowed to propagate; the direction guards catch them.
            rhs = np.concatenate([bx, by, bz])
            sol = scipy.linalg.lu_solve(lu, rhs, check_finite=False)
            sol += scipy.linalg.lu_solve(lu, rhs - K @ sol, check_finite=False)
            return sol[:n], sol[n : n + p], sol[n + p :]

        u2 = kkt_solve(-c, b, h)
        denom = float(c @ u2[0] + b @ u2[1] + h @ u2[2] - kappa / tau)
        if not np.isfinite(denom) or abs(denom) < 1e-300:
            return bail(NUMERICAL_FAILURE, "degenerate tau subsystem", it)

        def newton(eta, ds_parts, dkap):
            """Direction for residual factor eta and complementarity targets."""
            corr = bv.join(
                [sc.WT(cn.jordan_solve(lam, dsp))
                 for cn, sc, lam, dsp in zip(cone_objs, scl, lam_blks, ds_parts)]
            )
            f3 = -eta * r3 - corr
            u1 = kkt_solve(-eta * r1, -eta * r2, f3)
            f4 = -eta * r4 - dkap / tau
            dtau = (f4 - float(c @ u1[0] + b @ u1[1] + h @ u1[2])) / denom
            dx = u1[0] + dtau * u2[0]
            dy = u1[1] + dtau * u2[1]
            dz = u1[2] + dtau * u2[2]
            dz_blks = bv.split(dz)
            ds = bv.join(
                [sc.WT(cn.jordan_solve(lam, dsp) - sc.W(dzb))
                 for cn, sc, lam, dsp, dzb in zip(cone_objs, scl, lam_blks, ds_parts, dz_blks)]
            )
            dkappa = (dkap - kappa * dtau) / tau
            return dx, dy, dz, ds, dtau, dkappa

        def step_limit(ds, dz, dtau, dkappa):
            alpha = np.inf
            for cn, sl in zip(cone_objs, bv.slices):
                alpha = min(alpha, cn.max_step(s[sl], ds[sl]))
                alpha = min(alpha, cn.max_step(z[sl], dz[sl]))
            if dtau < 0.0:
                alpha = min(alpha, -tau / dtau)
            if dkappa < 0.0:
                alpha = min(alpha, -kappa / dkappa)
            return alpha

        # -- predictor
        ds_aff_t = [-cn.jordan_prod(lam, lam) for cn, lam in zip(cone_objs, lam_blks)]
        dkap_aff_t = -tau * kappa
        aff = newton(1.0, ds_aff_t, dkap_aff_t)
        if not all(np.all(np.isfinite(v)) for v in aff[:4]):
            return bail(NUMERICAL_FAILURE, "non-finite predictor direction", it)
        a_aff = min(1.0, step_limit(aff[3], aff[2], aff[4], aff[5]))
        mu_aff = (
            (s + a_aff * aff[3]) @ (z + a_aff * aff[2])
            + (tau + a_aff * aff[4]) * (kappa + a_aff * aff[5])
        ) / (deg + 1)
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3))

        # -- corrector: second-order term evaluated in the scaled space
        dz_aff_blks = bv.split(aff[2])
        ds_aff_blks = bv.split(aff[3])
        ds_comb_t = []
        for cn, sc, lam, dsb, dzb in zip(cone_objs, scl, lam_blks, ds_aff_blks, dz_aff_blks):
            cross = cn.jordan_prod(sc.WinvT(dsb), sc.W(dzb))
            ds_comb_t.append(-cn.jordan_prod(lam, lam) - cross + sigma * mu * cn.identity())
        dkap_comb_t = -tau * kappa - aff[4] * aff[5] + sigma * mu

        comb = newton(1.0 - sigma, ds_comb_t, dkap_comb_t)
        if not all(np.all(np.isfinite(v)) for v in comb[:4]):
            return bail(NUMERICAL_FAILURE, "non-finite corrector direction", it)
        alpha = min(1.0, config.step_frac * step_limit(comb[3], comb[2], comb[4], comb[5]))
        if alpha <= 1e-10:
            return bail(NUMERICAL_FAILURE, "step length collapsed", it)

        x = x + alpha * comb[0]
        y = y + alpha * comb[1]
        z = z + alpha * comb[2]
        s = s + alpha * comb[3]
        tau = tau + alpha * comb[4]
        kappa = kappa + alpha * comb[5]

    return bail(MAX_ITER, f"no convergence in {config.max_iter} iterations",
                config.max_iter)


def _pack_optimal(prog, xhat, yhat, duals, pobj, dobj, iters, tau, kappa) -> Solution:
    return Solution(
        status=OPTIMAL,
        x=xhat,
        obj=float(prog.c @ xhat),
        obj_dual=dobj,
        iterations=iters,
        duals=duals,
        tau=tau,
        kappa=kappa,
    )
