"""Symmetric-cone machinery for the interior-point solver.

Each cone exposes the pieces a Nesterov-Todd scaled path-following method
needs: an identity element, barrier degree, maximum step to the boundary,
and per-iteration scalings W with W @ z == inv(W).T @ s == lam (the scaled
point).  PSD blocks operate on svec vectors throughout.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .program import smat, svec, svec_dim


def _soc_jdet(u: np.ndarray) -> float:
    return float(u[0] * u[0] - u[1:] @ u[1:])


class NonnegCone:
    def __init__(self, dim: int):
        self.dim = dim
        self.rows = dim
        self.degree = dim

    def identity(self) -> np.ndarray:
        return np.ones(self.dim)

    def inside(self, u: np.ndarray) -> bool:
        return bool(np.all(u > 0.0))

    def max_step(self, u: np.ndarray, du: np.ndarray) -> float:
        neg = du < 0.0
        if not np.any(neg):
            return np.inf
        return float(np.min(-u[neg] / du[neg]))

    def scaling(self, s: np.ndarray, z: np.ndarray) -> "NonnegScaling":
        return NonnegScaling(np.sqrt(s / z), np.sqrt(s * z))

    def jordan_prod(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return u * v

    def jordan_solve(self, lam: np.ndarray, d: np.ndarray) -> np.ndarray:
        return d / lam


class NonnegScaling:
    def __init__(self, w: np.ndarray, lam: np.ndarray):
        self.w = w
        self.lam = lam

    def W(self, u: np.ndarray) -> np.ndarray:
        return self.w * u

    def WT(self, u: np.ndarray) -> np.ndarray:
        return self.w * u

    def Winv(self, u: np.ndarray) -> np.ndarray:
        return u / self.w

    def WinvT(self, u: np.ndarray) -> np.ndarray:
        return u / self.w

    def WtW(self) -> np.ndarray:
        return np.diag(self.w * self.w)


class SocCone:
    def __init__(self, dim: int):
        if dim < 2:
            raise ValueError("second-order cone needs dimension >= 2")
        self.dim = dim
        self.rows = dim
        self.degree = 1

    def identity(self) -> np.ndarray:
        e = np.zeros(self.dim)
        e[0] = 1.0
        return e

    def inside(self, u: np.ndarray) -> bool:
        return bool(u[0] > 0.0 and _soc_jdet(u) > 0.0)

    def max_step(self, u: np.ndarray, du: np.ndarray) -> float:
        # First positive root of the concave boundary gap
        # q(alpha) = u0 + alpha du0 - |u1 + alpha du1|.  If q's asymptotic
        # slope is >= 0 the gap never closes; otherwise the crossing is the
        # smaller quadratic root, with the discriminant clamped at zero so
        # exact tangencies (paths through the origin) are not missed.
        slope = float(du[0]) - float(np.linalg.norm(du[1:]))
        if slope >= 0.0:
            return np.inf
        a = _soc_jdet(du)
        b = float(u[0] * du[0] - u[1:] @ du[1:])
        c = _soc_jdet(u)
        if abs(a) < 1e-14 * max(1.0, abs(b), abs(c)):
            return -c / (2.0 * b) if b < 0.0 else np.inf
        r = np.sqrt(max(b * b - a * c, 0.0))
        roots = [(-b - r) / a, (-b + r) / a]
        pos = [t for t in roots if t > 0.0 and u[0] + t * du[0] >= -1e-12]
        return float(min(pos)) if pos else np.inf

    def scaling(self, s: np.ndarray, z: np.ndarray) -> "SocScaling":
        # Floor the determinants; roundoff can graze the boundary from inside.
        a = np.sqrt(max(_soc_jdet(s), 1e-28 * float(s @ s) + 1e-300))
        b = np.sqrt(max(_soc_jdet(z), 1e-28 * float(z @ z) + 1e-300))
        st = s / a
        zt = z / b
        gamma = np.sqrt(max((1.0 + st @ zt) / 2.0, 1e-30))
        # Reflector mapping zt to st, then its Jordan square root.
        w = (st + _jmul(zt)) / (2.0 * gamma)
        v = w.copy()
        v[0] += 1.0
        v /= np.sqrt(2.0 * v[0])
        beta = np.sqrt(a / b)
        lam = beta * (2.0 * v * (v @ z) - _jmul(z))
        return SocScaling(beta, v, w, lam)

    def jordan_prod(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(u)
        out[0] = u @ v
        out[1:] = u[0] * v[1:] + v[0] * u[1:]
        return out

    def jordan_solve(self, lam: np.ndarray, d: np.ndarray) -> np.ndarray:
        det = _soc_jdet(lam)
        x0 = (lam[0] * d[0] - lam[1:] @ d[1:]) / det
        x1 = (d[1:] - x0 * lam[1:]) / lam[0]
        return np.concatenate(([x0], x1))


def _jmul(u: np.ndarray) -> np.ndarray:
    out = u.copy()
    out[1:] = -out[1:]
    return out


class SocScaling:
    """W = beta * (2 v v' - J); W^2 = beta^2 (2 w w' - J) since w = v o v."""

    def __init__(self, beta: float, v: np.ndarray, w: np.ndarray, lam: np.ndarray):
        self.beta = beta
        self.v = v
        self.w = w
        self.lam = lam

    def _H(self, u: np.ndarray) -> np.ndarray:
        return 2.0 * self.v * (self.v @ u) - _jmul(u)

    def W(self, u: np.ndarray) -> np.ndarray:
        return self.beta * self._H(u)

    def WT(self, u: np.ndarray) -> np.ndarray:
        return self.beta * self._H(u)

    def Winv(self, u: np.ndarray) -> np.ndarray:
        return _jmul(self._H(_jmul(u))) / self.beta

    def WinvT(self, u: np.ndarray) -> np.ndarray:
        return self.Winv(u)

    def WtW(self) -> np.ndarray:
        d = self.w.shape[0]
        J = -np.eye(d)
        J[0, 0] = 1.0
        return self.beta**2 * (2.0 * np.outer(self.w, self.w) - J)


def _chol_jitter(S: np.ndarray) -> np.ndarray:
    # Roundoff can graze the boundary even though the iterate is kept
    # strictly interior; retry once with a minimal diagonal shift.
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        lam0 = float(np.linalg.eigvalsh(S)[0])
        shift = 2.0 * max(0.0, -lam0) + 1e-14 * (1.0 + abs(np.trace(S)) / S.shape[0])
        return np.linalg.cholesky(S + shift * np.eye(S.shape[0]))


class PsdCone:
    def __init__(self, k: int):
        self.k = k
        self.rows = svec_dim(k)
        self.degree = k

    def identity(self) -> np.ndarray:
        return svec(np.eye(self.k))

    def inside(self, u: np.ndarray) -> bool:
        try:
            np.linalg.cholesky(smat(u, self.k))
            return True
        except np.linalg.LinAlgError:
            return False

    def max_step(self, u: np.ndarray, du: np.ndarray) -> float:
        U = smat(u, self.k)
        D = smat(du, self.k)
        Lc = _chol_jitter(U)
        M = scipy.linalg.solve_triangular(Lc, D, lower=True)
        M = scipy.linalg.solve_triangular(Lc, M.T, lower=True).T
        lam_min = float(np.linalg.eigvalsh((M + M.T) / 2.0)[0])
        if lam_min >= 0.0:
            return np.inf
        return -1.0 / lam_min

    def scaling(self, s: np.ndarray, z: np.ndarray) -> "PsdScaling":
        S = smat(s, self.k)
        Z = smat(z, self.k)
        Ls = _chol_jitter(S)
        Lz = _chol_jitter(Z)
        U, sig, Vt = np.linalg.svd(Lz.T @ Ls)
        # R satisfies R^{-1} S R^{-T} = R^T Z R = diag(sig).
        R = Ls @ Vt.T / np.sqrt(sig)
        Rinv = (np.sqrt(sig)[:, None]) * np.linalg.solve(Ls @ Vt.T, np.eye(self.k))
        lam = svec(np.diag(sig))
        return PsdScaling(self.k, R, Rinv, sig, lam)

    def jordan_prod(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        U = smat(u, self.k)
        V = smat(v, self.k)
        return svec((U @ V + V @ U) / 2.0)

    def jordan_solve(self, lam: np.ndarray, d: np.ndarray) -> np.ndarray:
        # lam is svec of a diagonal matrix; solve (Lam X + X Lam)/2 = D.
        sig = smat(lam, self.k).diagonal()
        D = smat(d, self.k)
        X = 2.0 * D / (sig[:, None] + sig[None, :])
        return svec(X)


class PsdScaling:
    def __init__(self, k: int, R: np.ndarray, Rinv: np.ndarray, sig: np.ndarray, lam: np.ndarray):
        self.k = k
        self.R = R
        self.Rinv = Rinv
        self.sig = sig
        self.lam = lam

    def W(self, u: np.ndarray) -> np.ndarray:
        X = smat(u, self.k)
        return svec(self.R.T @ X @ self.R)

    def WT(self, u: np.ndarray) -> np.ndarray:
        X = smat(u, self.k)
        return svec(self.R @ X @ self.R.T)

    def Winv(self, u: np.ndarray) -> np.ndarray:
        X = smat(u, self.k)
        return svec(self.Rinv.T @ X @ self.Rinv)

    def WinvT(self, u: np.ndarray) -> np.ndarray:
        X = smat(u, self.k)
        return svec(self.Rinv @ X @ self.Rinv.T)

    def WtW(self) -> np.ndarray:
        T = self.R @ self.R.T
        d = svec_dim(self.k)
        out = np.empty((d, d))
        iu = np.triu_indices(self.k)
        for col in range(d):
            i, j = iu[0][col], iu[1][col]
            E = np.zeros((self.k, self.k))
            if i == j:
                E[i, i] = 1.0
            else:
                E[i, j] = E[j, i] = 1.0 / np.sqrt(2.0)
            out[:, col] = svec(T @ E @ T)
        return out


def make_cone(kind: str, size: int):
    if kind == "nonneg":
        return NonnegCone(size)
    if kind == "soc":
        return SocCone(size)
    if kind == "psd":
        return PsdCone(size)
    raise ValueError(f"no interior-point cone for kind {kind}")
