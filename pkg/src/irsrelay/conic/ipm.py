"""Homogeneous primal-dual interior-point method for LP/SOC/SDP.

Solves the self-dual embedding of ``min c'x, Ax = b, x in K`` with
Nesterov-Todd scaling and a Mehrotra predictor-corrector.  The Newton system
is reduced to the ``m x m`` Schur complement ``A W'W A'``; PSD rows that are
diagonal selectors (unit-diagonal constraints) are handled without forming
``G A_i G`` products.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .cones import NonnegCone, PsdCone, SecondOrderCone
from .program import ConicProgram, StandardForm, Var

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITER = "max-iterations"
STALLED = "stalled"


@dataclass
class ConicSolution:
    status: str
    objective: float
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    x: np.ndarray = field(repr=False, default=None)
    y: np.ndarray = field(repr=False, default=None)
    z: np.ndarray = field(repr=False, default=None)
    _sf: StandardForm = field(repr=False, default=None)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def usable(self, tol: float = 1e-6) -> bool:
        """Optimal, or stopped early with residuals and gap below ``tol``."""
        if self.optimal:
            return True
        if self.status in (INFEASIBLE, UNBOUNDED) or self.x is None:
            return False
        return max(self.primal_residual, self.dual_residual, self.gap) <= tol

    def value(self, var: Var) -> np.ndarray:
        return self._sf.extract(self.x, var)


def solve(prog, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> ConicSolution:
    sf = prog.compile() if isinstance(prog, ConicProgram) else copy.deepcopy(prog)
    return _Solver(sf, tol, max_iter).run()


class _Solver:
    def __init__(self, sf: StandardForm, tol: float, max_iter: int):
        self.sf = sf
        self.tol = tol
        self.max_iter = max_iter
        rn = sf.row_norms()
        zero = rn == 0
        # 0 = b_i with b_i != 0
        self.trivially_infeasible = bool(np.any(np.abs(sf.b[zero]) > 0))
        rn[zero] = 1.0
        self.row_scale = 1.0 / rn
        sf.scale_rows(self.row_scale)
        # unit max-norm objective; large penalty weights otherwise stall the iterates
        cmax = float(np.max(np.abs(sf.c))) if sf.c.size else 0.0
        self.obj_scale = 1.0 / cmax if cmax > 0 else 1.0
        self.c_orig = sf.c
        sf.c = sf.c * self.obj_scale
        self.nu = sum(k.degree for k in sf.cones)

    # -- helpers -------------------------------------------------------------

    def _cone_map(self, fn, *vecs):
        out = np.empty(self.sf.n)
        for k in self.sf.cones:
            out[k.sl] = fn(k, *[v[k.sl] for v in vecs])
        return out

    def _identity(self):
        return self._cone_map(lambda k: k.identity())

    def _max_step(self, x, dx):
        return min(k.max_step(x[k.sl], dx[k.sl]) for k in self.sf.cones)

    def _schur(self, scal):
        sf = self.sf
        m = sf.m
        M = np.zeros((m, m))
        for k, s in zip(sf.cones, scal):
            if isinstance(k, NonnegCone):
                Ak = sf.A_vec[:, k.sl]
                M += (Ak * s.w**2) @ Ak.T
            elif isinstance(k, SecondOrderCone):
                Ak = sf.A_vec[:, k.sl].reshape(m, k.count, k.q)
                T = np.einsum("mkq,kqr->mkr", Ak, s.WTW_blocks())
                M += np.einsum("mkr,nkr->mn", T, Ak)
        for pr in sf.psd_rows:
            s = scal[sf.cones.index(pr.cone)]
            G = s.G
            if pr.diag_idx.size:
                M[np.ix_(pr.diag_idx, pr.diag_idx)] += pr.D @ (G * G) @ pr.D.T
            if pr.dense_idx.size:
                T = np.matmul(np.matmul(G, pr.S), G)
                M[np.ix_(pr.dense_idx, pr.dense_idx)] += np.einsum("iab,jab->ij", pr.S, T)
                if pr.diag_idx.size:
                    cross = pr.D @ np.diagonal(T, axis1=1, axis2=2).T
                    M[np.ix_(pr.diag_idx, pr.dense_idx)] += cross
                    M[np.ix_(pr.dense_idx, pr.diag_idx)] += cross.T
        return (M + M.T) / 2.0

    def _factor(self, M):
        """Return a solver for ``M v = r``; Cholesky with growing shifts, then a clipped eigen solve."""
        reg = 0.0
        scale = max(1.0, float(np.max(np.abs(np.diag(M))))) if M.size else 1.0
        for _ in range(4):
            try:
                c = sla.cho_factor(M + reg * scale * np.eye(M.shape[0]), lower=True, check_finite=False)
                return lambda r: sla.cho_solve(c, r, check_finite=False)
            except (np.linalg.LinAlgError, ValueError):
                reg = 1e-14 if reg == 0.0 else reg * 100.0
        w, V = np.linalg.eigh(M)
        if not np.all(np.isfinite(w)) or w[-1] <= 0:
            raise np.linalg.LinAlgError("Schur complement not positive definite")
        w = np.maximum(w, 1e-12 * w[-1])
        return lambda r: V @ ((V.T @ r) / w)

    def _WT(self, scal, d):
        return self._cone_map_scaled(scal, d, "WT")

    def _W(self, scal, d):
        return self._cone_map_scaled(scal, d, "W")

    def _cone_map_scaled(self, scal, d, attr):
        out = np.empty_like(d)
        for k, s in zip(self.sf.cones, scal):
            out[k.sl] = getattr(s, attr)(d[k.sl])
        return out

    def _WTW(self, scal, u):
        return self._WT(scal, self._W(scal, u))

    # -- Newton direction ----------------------------------------------------

    def _direction(self, scal, chol, d, dtk, eta, res, state):
        sf = self.sf
        x, y, z, tau, kappa = state
        rp, rd, rg = res
        WTd = self._WT(scal, d)
        WTW_rd = self._WTW(scal, rd)
        WTW_c = self._WTW(scal, sf.c)
        A_WTW_c = sf.matvec(WTW_c)
        rhs1 = eta * rp - sf.matvec(WTd) + eta * sf.matvec(WTW_rd)
        p = chol(rhs1)
        q = chol(A_WTW_c + sf.b)
        g_rhs = eta * rg + sf.c @ WTd - eta * (sf.c @ WTW_rd) + dtk / tau
        bb = sf.b - A_WTW_c
        denom = bb @ q + sf.c @ WTW_c + kappa / tau
        dtau = (g_rhs - bb @ p) / denom
        dy = p + q * dtau
        dz = eta * rd - sf.rmatvec(dy) + sf.c * dtau
        dx = WTd - self._WTW(scal, dz)
        dkappa = (dtk - kappa * dtau) / tau
        return dx, dy, dz, dtau, dkappa

    def _step_len(self, state, dirn):
        x, y, z, tau, kappa = state
        dx, dy, dz, dtau, dkappa = dirn
        a = min(self._max_step(x, dx), self._max_step(z, dz))
        if dtau < 0:
            a = min(a, -tau / dtau)
        if dkappa < 0:
            a = min(a, -kappa / dkappa)
        return a

    def _predictor_corrector(self, scal, chol, lam, mu, res, state):
        sf = self.sf
        tau, kappa = state[3], state[4]
        d_aff = -lam
        aff = self._direction(scal, chol, d_aff, -tau * kappa, 1.0, res, state)
        a_aff = min(1.0, self._step_len(state, aff))
        sigma = min(1.0, max(0.0, (1.0 - a_aff))) ** 3

        dz_s = self._W(scal, aff[2])
        dx_s = d_aff - dz_s
        e = self._identity()
        d = np.empty(sf.n)
        for k in sf.cones:
            sl = k.sl
            r = (-k.jordan_prod(lam[sl], lam[sl]) - k.jordan_prod(dx_s[sl], dz_s[sl])
                 + sigma * mu * e[sl])
            d[sl] = k.jordan_div(lam[sl], r)
        dtk = sigma * mu - tau * kappa - aff[3] * aff[4]
        dirn = self._direction(scal, chol, d, dtk, 1.0 - sigma, res, state)
        finite = all(np.all(np.isfinite(v)) for v in dirn)
        return dirn if finite else None

    # -- main loop -----------------------------------------------------------

    def run(self) -> ConicSolution:
        sf = self.sf
        if self.trivially_infeasible:
            return self._result(INFEASIBLE, None, 0)
        x = self._identity()
        z = self._identity()
        y = np.zeros(sf.m)
        tau = kappa = 1.0
        bnorm = max(1.0, np.linalg.norm(sf.b))
        cnorm = max(1.0, np.linalg.norm(sf.c))
        best = None
        stall = 0
        for it in range(self.max_iter + 1):
            Ax = sf.matvec(x)
            ATy = sf.rmatvec(y)
            rp = sf.b * tau - Ax
            rd = sf.c * tau - ATy - z
            pobj = sf.c @ x
            dobj = sf.b @ y
            rg = kappa + pobj - dobj
            mu = (x @ z + tau * kappa) / (self.nu + 1)

            pres = np.linalg.norm(rp) / tau / bnorm
            dres = np.linalg.norm(rd) / tau / cnorm
            gap = (x @ z) / tau**2
            pobj_h, dobj_h = pobj / tau, dobj / tau
            relgap = max(gap, abs(pobj_h - dobj_h)) / max(1.0, abs(pobj_h))
            state = (x, y, z, tau, kappa)
            score = max(pres, dres, relgap)
            if best is None or score < best[0]:
                best = (score, state, pres, dres, relgap, it)
            if pres <= self.tol and dres <= self.tol and relgap <= self.tol:
                return self._result(OPTIMAL, state, it, pres, dres, relgap)
            # infeasibility certificates
            if dobj > 0:
                if np.linalg.norm(ATy + z) / dobj * cnorm <= self.tol * cnorm and tau < 1e-2 * kappa:
                    return self._result(INFEASIBLE, state, it, pres, dres, relgap)
            if pobj < 0:
                if np.linalg.norm(Ax) / -pobj <= self.tol and tau < 1e-2 * kappa:
                    return self._result(UNBOUNDED, state, it, pres, dres, relgap)
            if it == self.max_iter:
                break

            try:
                with np.errstate(all="ignore"):
                    scal = [k.scaling(x[k.sl], z[k.sl]) for k in sf.cones]
                    H = self._schur(scal)
                if not np.all(np.isfinite(H)):
                    log.debug("non-finite scaling at iteration %d", it)
                    break
                chol = self._factor(H)
            except np.linalg.LinAlgError:
                log.debug("factorization failed at iteration %d", it)
                break
            lam = np.empty(sf.n)
            for k, s in zip(sf.cones, scal):
                lam[k.sl] = s.lam
            res = (rp, rd, rg)

            with np.errstate(all="ignore"):
                dirn = self._predictor_corrector(scal, chol, lam, mu, res, state)
            if dirn is None:
                log.debug("non-finite search direction at iteration %d", it)
                break
            a = min(1.0, 0.99 * self._step_len(state, dirn))
            if not np.isfinite(a) or a <= 0:
                break
            dx, dy, dz, dtau, dkappa = dirn
            x = x + a * dx
            y = y + a * dy
            z = z + a * dz
            tau = tau + a * dtau
            kappa = kappa + a * dkappa
            for k in sf.cones:
                if isinstance(k, PsdCone):
                    for v in (x, z):
                        X = v[k.sl].reshape(k.p, k.p)
                        v[k.sl] = ((X + X.T) / 2.0).ravel()
            stall = stall + 1 if a < 1e-8 else 0
            if stall >= 5:
                break
            # keep the embedding normalized
            nrm = tau + kappa
            if nrm > 1e8 or nrm < 1e-8:
                x, y, z, tau, kappa = x / nrm, y / nrm, z / nrm, tau / nrm, kappa / nrm

        _, state, pres, dres, relgap, _ = best
        status = MAX_ITER if it >= self.max_iter else STALLED
        return self._result(status, state, it, pres, dres, relgap)

    def _result(self, status, state, it, pres=np.inf, dres=np.inf, gap=np.inf):
        sf = self.sf
        if state is None:
            return ConicSolution(status, np.nan, pres, dres, gap, it, _sf=sf)
        x, y, z, tau, kappa = state
        if status in (INFEASIBLE, UNBOUNDED):
            obj = np.inf if status == INFEASIBLE else -np.inf
            obj = obj if sf.sign > 0 else -obj
            return ConicSolution(status, obj, pres, dres, gap, it, x, y * self.row_scale, z, sf)
        k = 1.0 / self.obj_scale
        xs, ys, zs = x / tau, y / tau * k, z / tau * k
        obj = sf.sign * (self.c_orig @ xs) + sf.obj_const
        return ConicSolution(status, float(obj), float(pres), float(dres), float(gap), it,
                             xs, ys * self.row_scale, zs, sf)
