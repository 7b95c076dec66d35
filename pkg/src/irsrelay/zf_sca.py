"""Zero-forcing relay beamformer with SCA phase updates (low-complexity method).

Each outer iteration recomputes the ZF beamformer, then updates the first-slot
and second-slot IRS phases through convex surrogates over the unit disk,
followed by projection back to unit modulus.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import conic
from .alternation import Iterate, guarded_sweep, initial_phases, refine
from .channel import ChannelSet, NetworkConfig
from .errors import DegenerateChannelError
from .metrics import (Beamformer, evaluate, fit_power, project_unit_modulus,
                      relay_tx_power, snr_pair)
from .trace import RunTrace

log = logging.getLogger(__name__)

RANK_TOL = 1e-10
TRACE_COLUMNS = ("iteration", "r12", "r21", "min_rate", "t1", "t2", "status1", "status2",
                 "inner1", "inner2", "safeguard_hits")


def _check_rank(Hb: np.ndarray, what: str) -> None:
    s = np.linalg.svd(Hb, compute_uv=False)
    if s[0] == 0 or s[-1] <= RANK_TOL * s[0]:
        raise DegenerateChannelError(f"{what} is rank deficient (singular values {s})")


def stacked_channels(theta1, theta2, ch: ChannelSet):
    """``Hbar1 = [H1 th1, H2 th1]`` (M x 2) and ``Hbar2 = [H2 th2, H1 th2]^H`` (2 x M)."""
    Hb1 = np.column_stack([ch.H1 @ theta1, ch.H2 @ theta1])
    Hb2 = np.column_stack([ch.H2 @ theta2, ch.H1 @ theta2]).conj().T
    return Hb1, Hb2


def zf_beamformer(theta1, theta2, ch: ChannelSet, cfg: NetworkConfig) -> Beamformer:
    if ch.m < 2:
        raise DegenerateChannelError("zero forcing needs at least two relay antennas")
    Hb1, Hb2 = stacked_channels(theta1, theta2, ch)
    _check_rank(Hb1, "first-slot stacked channel")
    _check_rank(Hb2, "second-slot stacked channel")
    A0 = np.linalg.pinv(Hb2) @ np.linalg.pinv(Hb1)
    tau = fit_power(A0, theta1, ch, cfg)
    return Beamformer(tau * A0, tau, "zf")


# -- convex phase subproblems ---------------------------------------------------


class _DiskProgram:
    """Conic program over ``theta`` with ``|theta_n| <= 1`` and last entry 1.

    Element ``n`` lives in a 3-dim SOC ``(1, Re theta_n, Im theta_n)``.
    """

    def __init__(self, n: int):
        self.prog = conic.ConicProgram()
        self.cells = [self.prog.soc(3, name=f"theta{i}") for i in range(n)]
        for c in self.cells:
            self.prog.fix(c, 0, 1.0)
        self.s = self.prog.free(1, name="s")
        self.prog.maximize([(self.s, 1.0)])

    def re_inner(self, g: np.ndarray):
        """Terms and constant of ``Re{g^H theta}``."""
        g = np.asarray(g, dtype=complex)
        terms = [(c, [0.0, gi.real, gi.imag]) for c, gi in zip(self.cells, g[:-1])]
        return terms, float(g[-1].real)

    def bound_s(self, g: np.ndarray, const: float) -> None:
        """``s <= 2 Re{g^H theta} + const``."""
        terms, k = self.re_inner(g)
        terms = [(c, [-2.0 * x for x in coef]) for c, coef in terms]
        self.prog.add_constraint(terms + [(self.s, 1.0)], "<=", 2.0 * k + const)

    def norm_bound(self, F: np.ndarray) -> None:
        """``||F theta|| <= 1`` for complex ``F``."""
        rows = F.shape[0]
        r = self.prog.soc(1 + 2 * rows, name="power")
        self.prog.fix(r, 0, 1.0)
        for k in range(rows):
            for part in (0, 1):
                # part 0: Re(F theta)_k, part 1: Im(F theta)_k
                coef_r = np.zeros(1 + 2 * rows)
                coef_r[1 + 2 * k + part] = 1.0
                terms = [(r, coef_r)]
                for c, f in zip(self.cells, F[k, :-1]):
                    if part == 0:
                        terms.append((c, [0.0, -f.real, f.imag]))
                    else:
                        terms.append((c, [0.0, -f.imag, -f.real]))
                last = F[k, -1]
                self.prog.add_constraint(terms, "==", last.real if part == 0 else last.imag)

    def solve(self, tol: float):
        sol = conic.solve(self.prog, tol=tol)
        if not sol.usable(max(tol, 1e-6)):
            return sol, None
        theta = np.ones(len(self.cells) + 1, dtype=complex)
        for i, c in enumerate(self.cells):
            v = sol.value(c)
            theta[i] = v[1] + 1j * v[2]
        return sol, theta


@dataclass(frozen=True)
class StepInfo:
    status: str
    t: float
    ok: bool


def _theta1_kernels(A, theta2, ch, cfg):
    """Vectors ``b`` with ``B = P b b^H`` and the (theta1-independent) denominators."""
    A = A.A if isinstance(A, Beamformer) else A
    g12 = (ch.H2 @ theta2).conj() @ A  # theta2^H H2^H A
    g21 = (ch.H1 @ theta2).conj() @ A
    b12 = (g12 @ ch.H1).conj()
    b21 = (g21 @ ch.H2).conj()
    den12 = cfg.sigmar_sq * np.vdot(g12, g12).real + cfg.sigma2_sq
    den21 = cfg.sigmar_sq * np.vdot(g21, g21).real + cfg.sigma1_sq
    return (b12, cfg.p1, den12), (b21, cfg.p2, den21)


def b_matrices(A, theta2, ch, cfg):
    """Dense ``B12``, ``B21`` (rank one) for the first-slot SNR numerators."""
    (b12, p1, _), (b21, p2, _) = _theta1_kernels(A, theta2, ch, cfg)
    return p1 * np.outer(b12, b12.conj()), p2 * np.outer(b21, b21.conj())


def taylor_bound(B: np.ndarray, theta_tilde: np.ndarray, theta: np.ndarray) -> float:
    """First-order minorant ``2 Re{tt^H B th} - tt^H B tt`` of ``th^H B th``."""
    return float(2.0 * np.vdot(theta_tilde, B @ theta).real - np.vdot(theta_tilde, B @ theta_tilde).real)


def theta1_step(A, theta2, theta1_prev, ch: ChannelSet, cfg: NetworkConfig, tol: float = conic.DEFAULT_TOL,
                power_constraint: bool = True):
    """One SCA update of the first-slot phases; returns ``(theta1, StepInfo)``.

    ``power_constraint=False`` drops the relay budget from the subproblem;
    the caller must then rescale the relay matrix.
    """
    A = A.A if isinstance(A, Beamformer) else A
    dp = _DiskProgram(ch.n)
    kernels = _theta1_kernels(A, theta2, ch, cfg)
    snr_now = [p * abs(np.vdot(b, theta1_prev)) ** 2 / den for b, p, den in kernels]
    ref = max(min(snr_now), 1e-300)
    for b, p, den in kernels:
        # s * ref <= (2 Re{tt^H B th} - tt^H B tt) / den, with tt^H B = p (b^H tt)^* b^H
        w = np.vdot(b, theta1_prev)
        dp.bound_s(p * w * b / (den * ref), -p * abs(w) ** 2 / (den * ref))
    if power_constraint:
        budget = cfg.pr - cfg.sigmar_sq * float(np.sum(np.abs(A) ** 2))
        if budget <= 0:
            return theta1_prev.copy(), StepInfo(conic.INFEASIBLE, np.nan, False)
        F = np.vstack([np.sqrt(cfg.p1) * A @ ch.H1, np.sqrt(cfg.p2) * A @ ch.H2]) / np.sqrt(budget)
        dp.norm_bound(F)
    sol, theta = dp.solve(tol)
    if theta is None:
        log.debug("theta1 subproblem: %s", sol.status)
        return theta1_prev.copy(), StepInfo(sol.status, np.nan, False)
    t = 0.5 * np.log2(1.0 + max(sol.objective, 0.0) * ref)
    return project_unit_modulus(theta), StepInfo(sol.status, float(t), True)


@dataclass(frozen=True)
class SurrogateCoefficients:
    """Affine minorant ``2 Re{f^H th} + d`` of ``th^H C th / th^H D th`` on ``||th||^2 <= N+1``."""

    f: np.ndarray
    d: float
    lambda_max_D: float

    def value(self, theta: np.ndarray) -> float:
        return float(2.0 * np.vdot(self.f, theta).real + self.d)


def ratio_kernels(A, theta1, ch: ChannelSet, cfg: NetworkConfig):
    """``(C12, D12), (C21, D21)`` so that ``snr = th2^H C th2 / th2^H D th2``."""
    A = A.A if isinstance(A, Beamformer) else A
    out = []
    for Hs, Hd, p, s2 in ((ch.H1, ch.H2, cfg.p1, cfg.sigma2_sq), (ch.H2, ch.H1, cfg.p2, cfg.sigma1_sq)):
        c = Hd.conj().T @ (A @ (Hs @ theta1))
        G = Hd.conj().T @ A
        D = cfg.sigmar_sq * (G @ G.conj().T)
        D[-1, -1] += s2
        out.append((p * np.outer(c, c.conj()), D))
    return tuple(out)


def ratio_surrogate(C: np.ndarray, D: np.ndarray, theta_tilde: np.ndarray) -> SurrogateCoefficients:
    n1 = theta_tilde.size
    lam = float(np.linalg.eigvalsh(D)[-1])
    c = float(np.vdot(theta_tilde, C @ theta_tilde).real)
    delta = float(np.vdot(theta_tilde, D @ theta_tilde).real)
    f = C @ theta_tilde / delta - (D @ theta_tilde - lam * theta_tilde) * c / delta**2
    d = -(2.0 * lam * n1 - delta) * c / delta**2
    return SurrogateCoefficients(f, d, lam)


def disk_maxmin(fs, ds):
    """Exact ``max_theta min_k 2 Re{f_k^H theta} + d_k`` over ``|theta_n| <= 1``, last entry 1.

    Uses the one-dimensional Lagrange dual over the weight ``w`` on the first
    bound; at the optimal weight every coordinate with a nonzero mixed
    coefficient takes that coefficient's phase.  Returns ``(value, theta)``.
    """
    f1, f2 = (np.asarray(f, dtype=complex) for f in fs)
    d1, d2 = ds

    def dual(w):
        g = w * f1 + (1.0 - w) * f2
        return 2.0 * np.sum(np.abs(g[:-1])) + 2.0 * g[-1].real + w * d1 + (1.0 - w) * d2

    def argmax(w):
        g = w * f1 + (1.0 - w) * f2
        theta = np.ones(g.size, dtype=complex)
        mag = np.abs(g[:-1])
        nz = mag > 0
        theta[:-1][nz] = g[:-1][nz] / mag[nz]
        return theta

    def values(theta):
        return np.array([2.0 * np.vdot(f1, theta).real + d1, 2.0 * np.vdot(f2, theta).real + d2])

    res = minimize_scalar(dual, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12})
    w = min((0.0, 1.0, res.x), key=dual)
    # when both terms bind, the optimum mixes the maximizers on either side of w
    lo, hi = argmax(max(w - 1e-9, 0.0)), argmax(min(w + 1e-9, 1.0))
    va, vb = values(lo), values(hi)
    diff = (va[0] - va[1]) - (vb[0] - vb[1])
    cands = [argmax(w), lo, hi]
    if diff != 0.0:
        a = -(vb[0] - vb[1]) / diff
        if 0.0 < a < 1.0:
            cands.append(a * lo + (1.0 - a) * hi)
    theta = max(cands, key=lambda t: values(t).min())
    return float(values(theta).min()), theta


def theta2_step(A, theta1, theta2_prev, ch: ChannelSet, cfg: NetworkConfig,
                tol: float = conic.DEFAULT_TOL, solver: str = "dual"):
    """One SCA update of the second-slot phases; returns ``(theta2, StepInfo)``.

    ``solver="conic"`` solves the disk-relaxed surrogate with the interior
    point solver, ``"dual"`` with :func:`disk_maxmin`; both give the same point.
    """
    surs = [ratio_surrogate(C, D, theta2_prev) for C, D in ratio_kernels(A, theta1, ch, cfg)]
    if solver == "dual":
        val, theta = disk_maxmin([s.f for s in surs], [s.d for s in surs])
        t = 0.5 * np.log2(1.0 + max(val, 0.0))
        return project_unit_modulus(theta), StepInfo(conic.OPTIMAL, float(t), True)
    if solver != "conic":
        raise ValueError(f"unknown solver {solver!r}")
    dp = _DiskProgram(ch.n)
    ref = max(min(s.value(theta2_prev) for s in surs), 1e-300)
    for s in surs:
        dp.bound_s(s.f / ref, s.d / ref)
    sol, theta = dp.solve(tol)
    if theta is None:
        log.debug("theta2 subproblem: %s", sol.status)
        return theta2_prev.copy(), StepInfo(sol.status, np.nan, False)
    t = 0.5 * np.log2(1.0 + max(sol.objective, 0.0) * ref)
    return project_unit_modulus(theta), StepInfo(sol.status, float(t), True)


# -- outer loop -------------------------------------------------------------------


@dataclass(frozen=True)
class LcOptions:
    delta: float = 1e-3
    max_outer: int = 50
    safeguard: bool = True
    init: str = "aligned"  # or "ones", "random"
    seed: int | None = None
    inner_max: int = 2000  # SCA repeats per phase subproblem
    inner_tol: float = 1e-6
    theta2_solver: str = "dual"
    refit_power: bool = True
    theta1_power: bool = True  # keep the relay budget inside the first-slot subproblem
    tol: float = conic.DEFAULT_TOL


def feasible(bf: Beamformer, theta1, ch, cfg) -> Beamformer:
    """Scale ``bf`` down if ``theta1`` pushes it over the relay budget."""
    if relay_tx_power(bf, theta1, ch, cfg) > cfg.pr:
        return bf.scaled(fit_power(bf, theta1, ch, cfg))
    return bf


def refit(bf: Beamformer, theta1, ch, cfg) -> Beamformer:
    """Rescale ``bf`` so it spends exactly the relay budget at ``theta1``."""
    return bf.scaled(fit_power(bf, theta1, ch, cfg))


def _zf_iterate(th1, th2, ch, cfg):
    try:
        bf = zf_beamformer(th1, th2, ch, cfg)
    except DegenerateChannelError:
        return None
    return Iterate(bf, th1, th2, evaluate(bf, th1, th2, ch, cfg))


def run_lc_zf_sca(ch: ChannelSet, cfg: NetworkConfig, opts: LcOptions = LcOptions()):
    """Alternate ZF beamforming and the two phase subproblems until the min-rate settles.

    Each phase subproblem is solved by repeating its SCA step.  Returns
    ``(beamformer, theta1, theta2, trace)``.
    """
    start = time.perf_counter()
    th1, th2 = initial_phases(ch, opts.init, opts.seed)
    cur = _zf_iterate(th1, th2, ch, cfg)
    if cur is None:
        raise DegenerateChannelError("ZF beamformer undefined at the initial phases")
    trace = RunTrace("lc", TRACE_COLUMNS, initial_rate=cur.rate)

    def step1(it: Iterate):
        new, info = theta1_step(it.bf, it.theta2, it.theta1, ch, cfg, opts.tol, opts.theta1_power)
        if not info.ok:
            return None, info
        bf = (refit if opts.refit_power or not opts.theta1_power else feasible)(it.bf, new, ch, cfg)
        return Iterate(bf, new, it.theta2, evaluate(bf, new, it.theta2, ch, cfg)), info

    def step2(it: Iterate):
        new, info = theta2_step(it.bf, it.theta1, it.theta2, ch, cfg, opts.tol, opts.theta2_solver)
        if not info.ok:
            return None, info
        return Iterate(it.bf, it.theta1, new, evaluate(it.bf, it.theta1, new, ch, cfg)), info

    def sweep(it: Iterate):
        it, r1 = refine(step1, it, opts.inner_max, opts.inner_tol, opts.safeguard)
        it, r2 = refine(step2, it, opts.inner_max, opts.inner_tol, opts.safeguard)
        return it, (r1, r2)

    for i in range(1, opts.max_outer + 1):
        fresh = _zf_iterate(cur.theta1, cur.theta2, ch, cfg) if i > 1 else cur
        R_prev = cur.rate
        cur, (r1, r2), fresh_kept = guarded_sweep(sweep, cur, fresh, opts.safeguard)
        trace.safeguard_hits += (not fresh_kept) + r1.rejected + r2.rejected
        pair = snr_pair(cur.bf, cur.theta1, cur.theta2, ch, cfg)
        trace.append(iteration=i, r12=pair.r12, r21=pair.r21, min_rate=pair.min_rate,
                     t1=_t(r1), t2=_t(r2), status1=_status(r1), status2=_status(r2),
                     inner1=r1.steps, inner2=r2.steps, safeguard_hits=trace.safeguard_hits)
        if abs(cur.rate - R_prev) <= opts.delta:
            trace.converged = True
            break
    trace.wall_time = time.perf_counter() - start
    return cur.bf, cur.theta1, cur.theta2, trace


def _t(r):
    return r.info.t if r.info is not None else float("nan")


def _status(r):
    return r.info.status if r.info is not None else ""
