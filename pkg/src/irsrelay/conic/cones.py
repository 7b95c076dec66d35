"""Symmetric cones used by the interior-point solver.

Every cone owns a contiguous slice of the flat primal vector.  PSD blocks are
stored as the full ``p x p`` matrix flattened row-major, so the Euclidean inner
product of two flat vectors equals the trace inner product of the matrices.

The Jordan-algebra conventions follow the usual primal-dual setup: the identity
of a second-order cone is ``(1, 0, ..., 0)`` and each second-order cone counts
with degree one.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla


class Cone:
    kind = "?"

    def __init__(self, dim: int):
        self.dim = dim
        self.offset = 0

    @property
    def sl(self) -> slice:
        return slice(self.offset, self.offset + self.dim)

    def identity(self) -> np.ndarray:
        raise NotImplementedError

    def max_step(self, x: np.ndarray, dx: np.ndarray) -> float:
        raise NotImplementedError


class NonnegCone(Cone):
    kind = "l"

    @property
    def degree(self) -> int:
        return self.dim

    def identity(self):
        return np.ones(self.dim)

    def max_step(self, x, dx):
        neg = dx < 0
        if not np.any(neg):
            return np.inf
        return float(np.min(-x[neg] / dx[neg]))

    def scaling(self, x, z):
        return _NonnegScaling(x, z)

    def jordan_prod(self, u, v):
        return u * v

    def jordan_div(self, lam, r):
        return r / lam


class _NonnegScaling:
    def __init__(self, x, z):
        self.w = np.sqrt(x / z)
        self.lam = np.sqrt(x * z)

    def W(self, u):
        return self.w * u

    def WT(self, u):
        return self.w * u

    def WTW_dense(self):
        return np.diag(self.w**2)


class SecondOrderCone(Cone):
    """``count`` stacked cones ``{(x0, x1) : x0 >= ||x1||}`` of dimension ``q`` each.

    Grouping equal-size cones lets every cone operation run vectorized.
    """

    kind = "q"

    def __init__(self, q: int, count: int = 1):
        super().__init__(q * count)
        self.q = q
        self.count = count

    @property
    def degree(self) -> int:
        return self.count

    def _split(self, u):
        return u.reshape(self.count, self.q)

    def identity(self):
        e = np.zeros((self.count, self.q))
        e[:, 0] = 1.0
        return e.ravel()

    def max_step(self, x, dx):
        # smallest positive root of det(x + a dx) = 0, per cone
        X, D = self._split(x), self._split(dx)
        with np.errstate(all="ignore"):
            a = D[:, 0] ** 2 - np.sum(D[:, 1:] ** 2, axis=1)
            b = X[:, 0] * D[:, 0] - np.sum(X[:, 1:] * D[:, 1:], axis=1)
            c = X[:, 0] ** 2 - np.sum(X[:, 1:] ** 2, axis=1)
            if np.any(c <= 0):
                return 0.0
            disc = b * b - a * c
            sq = np.sqrt(np.maximum(disc, 0.0))
            q = -(b + np.copysign(sq, b))
            r1 = np.where(q != 0, q / a, np.inf)
            r2 = np.where(q != 0, c / q, np.inf)
            lin = np.abs(a) <= 1e-300 * np.maximum(1.0, np.abs(b))
            r_lin = np.where(b < 0, -c / (2 * b), np.inf)
            r1 = np.where(lin, r_lin, np.where(disc >= 0, r1, np.inf))
            r2 = np.where(lin, np.inf, np.where(disc >= 0, r2, np.inf))
            roots = np.concatenate([r1, r2])
        roots = roots[np.isfinite(roots) & (roots > 0)]
        return float(roots.min()) if roots.size else np.inf

    def scaling(self, x, z):
        return _SocScaling(self._split(x), self._split(z))

    def jordan_prod(self, u, v):
        U, V = self._split(u), self._split(v)
        out = np.empty_like(U)
        out[:, 0] = np.sum(U * V, axis=1)
        out[:, 1:] = U[:, :1] * V[:, 1:] + V[:, :1] * U[:, 1:]
        return out.ravel()

    def jordan_div(self, lam, r):
        L, R = self._split(lam), self._split(r)
        det = L[:, 0] ** 2 - np.sum(L[:, 1:] ** 2, axis=1)
        d0 = (L[:, 0] * R[:, 0] - np.sum(L[:, 1:] * R[:, 1:], axis=1)) / det
        out = np.empty_like(R)
        out[:, 0] = d0
        out[:, 1:] = (R[:, 1:] - d0[:, None] * L[:, 1:]) / L[:, :1]
        return out.ravel()


def _jnorm(V):
    r = np.linalg.norm(V[:, 1:], axis=1)
    return np.sqrt(np.maximum((V[:, 0] - r) * (V[:, 0] + r), 1e-300))


class _SocScaling:
    """Nesterov-Todd scaling ``W = beta (2 v v^T - J)`` with ``W z = W^{-1} x``, per cone."""

    def __init__(self, X, Z):
        aa, bb = _jnorm(X), _jnorm(Z)
        xb, zb = X / aa[:, None], Z / bb[:, None]
        gamma = np.sqrt((np.sum(xb * zb, axis=1) + 1.0) / 2.0)
        wb = xb.copy()
        wb[:, 0] += zb[:, 0]
        wb[:, 1:] -= zb[:, 1:]
        wb /= 2.0 * gamma[:, None]
        self.beta = np.sqrt(aa / bb)
        self.wbar = wb
        v = wb.copy()
        v[:, 0] += 1.0
        v /= np.sqrt(2.0 * v[:, :1])
        self.v = v
        self.shape = X.shape
        self.lam = self.W(Z.ravel())

    def W(self, u):
        U = u.reshape(self.shape)
        out = 2.0 * self.v * np.sum(self.v * U, axis=1)[:, None]
        out[:, 0] -= U[:, 0]
        out[:, 1:] += U[:, 1:]
        return (self.beta[:, None] * out).ravel()

    WT = W

    def WTW_blocks(self):
        """``(count, q, q)`` diagonal blocks of ``W^T W``."""
        k, q = self.shape
        J = -np.eye(q)
        J[0, 0] = 1.0
        outer = np.einsum("ki,kj->kij", self.wbar, self.wbar)
        return self.beta[:, None, None] ** 2 * (2.0 * outer - J[None])

    def WTW_dense(self):
        return sla.block_diag(*self.WTW_blocks())


class PsdCone(Cone):
    """Real symmetric positive semidefinite ``p x p`` matrices."""

    kind = "s"

    def __init__(self, p: int):
        super().__init__(p * p)
        self.p = p

    @property
    def degree(self) -> int:
        return self.p

    def mat(self, u):
        return u.reshape(self.p, self.p)

    def identity(self):
        return np.eye(self.p).ravel()

    def max_step(self, x, dx):
        try:
            L = _psd_factor(self.mat(x))
        except np.linalg.LinAlgError:
            return 0.0
        try:
            T = np.linalg.solve(L, self.mat(dx))
            T = np.linalg.solve(L, T.T)
            if not np.all(np.isfinite(T)):
                return 0.0
            lo = np.linalg.eigvalsh((T + T.T) / 2.0)[0]
        except np.linalg.LinAlgError:
            return 0.0
        return np.inf if lo >= 0 else float(-1.0 / lo)

    def scaling(self, x, z):
        return _PsdScaling(self.mat(x), self.mat(z))

    def jordan_prod(self, u, v):
        U, V = self.mat(u), self.mat(v)
        P = U @ V
        return ((P + P.T) / 2.0).ravel()

    def jordan_div(self, lam, r):
        # lam is the diagonal scaled point stored as a full matrix
        d = np.diag(self.mat(lam))
        R = self.mat(r)
        return (2.0 * R / (d[:, None] + d[None, :])).ravel()


def _psd_factor(X):
    """``L`` with ``L L' = X``; near-singular iterates fall back to a clipped eigen square root."""
    try:
        return np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh((X + X.T) / 2.0)
        if not w[-1] > 0:
            raise
        return V * np.sqrt(np.maximum(w, 1e-15 * w[-1]))[None, :]


class _PsdScaling:
    def __init__(self, X, Z):
        Lx = _psd_factor(X)
        Lz = _psd_factor(Z)
        U, s, Vt = np.linalg.svd(Lz.T @ Lx)
        self.r = Lx @ Vt.T / np.sqrt(s)[None, :]
        self.G = self.r @ self.r.T
        self.lam = np.diag(s).ravel()
        self.p = X.shape[0]

    def W(self, u):
        U = u.reshape(self.p, self.p)
        return (self.r.T @ U @ self.r).ravel()

    def WT(self, u):
        U = u.reshape(self.p, self.p)
        return (self.r @ U @ self.r.T).ravel()
