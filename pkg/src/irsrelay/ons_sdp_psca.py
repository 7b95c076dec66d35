"""One-step SVD beamformer with penalized SDP phase updates (high-performance method).

The relay matrix is built from the leading singular subspaces of the stacked
channels and scaled to the power budget.  Phases are lifted to
``Theta = theta theta^H``; each slot is optimized by a sequence of SDPs whose
rank-one deviation ``tr(Theta) - lambda_max(Theta)`` is penalized with a
growing weight ``mu``.  The second-slot SNR ratios are convexified with a
Dinkelbach-style quadratic transform refreshed at every inner iteration.

Lifted variables are complex Hermitian ``(N+1) x (N+1)`` matrices, solved as
real symmetric blocks of size ``2(N+1)``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from . import conic
from .alternation import Iterate, guarded_sweep, initial_phases, refine
from .channel import ChannelSet, NetworkConfig
from .errors import DegenerateChannelError, RankOneError
from .metrics import Beamformer, evaluate, fit_power, project_unit_modulus, snr_pair
from .trace import RunTrace
from .zf_sca import _check_rank, feasible, refit, stacked_channels

log = logging.getLogger(__name__)

LN2 = np.log(2.0)
RANK_ONE_TOL = 1e-3
TRACE_COLUMNS = ("iteration", "r12", "r21", "min_rate", "xi1", "xi2", "mu1", "mu2",
                 "lambda_ratio_1", "lambda_ratio_2", "inner1", "inner2", "safeguard_hits")


# -- beamformer --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OnsFactors:
    U1: np.ndarray
    S11: np.ndarray
    V1: np.ndarray
    U2: np.ndarray
    S21: np.ndarray
    V2: np.ndarray
    U11: np.ndarray
    V21: np.ndarray
    Upsilon: np.ndarray
    rho: float


def ons_beamformer(theta1, theta2, ch: ChannelSet, cfg: NetworkConfig):
    """``A = rho * V21 U2^H V1 U11^H`` scaled to the relay budget; returns ``(Beamformer, OnsFactors)``."""
    if ch.m < 2:
        raise DegenerateChannelError("the one-step beamformer needs at least two relay antennas")
    Hb1, Hb2 = stacked_channels(theta1, theta2, ch)
    _check_rank(Hb1, "first-slot stacked channel")
    _check_rank(Hb2, "second-slot stacked channel")
    U1, s1, V1h = np.linalg.svd(Hb1)  # Hb1 = U1 S1 V1^H, singular values nonincreasing
    U2, s2, V2h = np.linalg.svd(Hb2)
    V1, V2 = V1h.conj().T, V2h.conj().T
    U11, V21 = U1[:, :2], V2[:, :2]
    Ups = V21 @ U2.conj().T @ V1 @ U11.conj().T
    rho = fit_power(Ups, theta1, ch, cfg)
    f = OnsFactors(U1, np.diag(s1), V1, U2, np.diag(s2), V2, U11, V21, Ups, rho)
    return Beamformer(rho * Ups, rho, "ons"), f


# -- lifted quantities ---------------------------------------------------------------


def lift_phase(theta: np.ndarray) -> np.ndarray:
    return np.outer(theta, theta.conj())


def lambda_ratio(Theta: np.ndarray) -> float:
    """``lambda_max / trace``; 1 for an exactly rank-one matrix."""
    ev = np.linalg.eigvalsh(Theta)
    return float(ev[-1] / np.sum(ev))


@dataclass(frozen=True)
class LambdaMaxMinorant:
    value: float
    eigvec: np.ndarray

    def __call__(self, Theta: np.ndarray) -> float:
        """``lambda_max(Tt) + v^H (Theta - Tt) v``, which equals ``v^H Theta v``."""
        return float(np.vdot(self.eigvec, Theta @ self.eigvec).real)


def lambda_max_surrogate(Theta_tilde: np.ndarray) -> LambdaMaxMinorant:
    w, V = np.linalg.eigh(Theta_tilde)
    return LambdaMaxMinorant(float(w[-1]), V[:, -1])


def extract_rank_one(Theta: np.ndarray, tol: float = RANK_ONE_TOL) -> np.ndarray:
    """Principal eigenvector normalized to last entry 1, then projected to unit modulus."""
    w, V = np.linalg.eigh(Theta)
    ratio = w[-1] / np.sum(w)
    if ratio < 1.0 - tol:
        raise RankOneError(ratio)
    return project_unit_modulus(V[:, -1])


def _tr(Q: np.ndarray, Theta: np.ndarray) -> float:
    return float(np.real(np.sum(Q.T * Theta)))


def theta1_kernels(A, Theta2, ch: ChannelSet, cfg: NetworkConfig):
    """Per direction ``(P * B, den)`` with ``snr = tr(Theta1 P B) / den``."""
    A = A.A if isinstance(A, Beamformer) else A
    out = []
    for Hs, Hd, p, s2 in ((ch.H1, ch.H2, cfg.p1, cfg.sigma2_sq), (ch.H2, ch.H1, cfg.p2, cfg.sigma1_sq)):
        G = Hd.conj().T @ A @ Hs  # signal: theta2^H G theta1
        B = p * (G.conj().T @ Theta2 @ G)
        K = Hd.conj().T @ A
        D = cfg.sigmar_sq * (K @ K.conj().T)
        D[-1, -1] += s2
        out.append((B, _tr(D, Theta2)))
    return tuple(out)


def power_kernel(A, ch: ChannelSet, cfg: NetworkConfig) -> np.ndarray:
    """``P1 H1^H A^H A H1 + P2 H2^H A^H A H2``; relay power is ``tr(Theta1 Q) + sr2 ||A||_F^2``."""
    A = A.A if isinstance(A, Beamformer) else A
    F1, F2 = A @ ch.H1, A @ ch.H2
    return cfg.p1 * F1.conj().T @ F1 + cfg.p2 * F2.conj().T @ F2


def theta2_kernels(A, Theta1, ch: ChannelSet, cfg: NetworkConfig, denominator: str = "d"):
    """Per direction ``(Q, Den)`` with ``snr = tr(Theta2 Q) / tr(Theta2 Den)``.

    ``Q`` already carries the source power ``beta P``.  ``denominator="d"``
    uses the noise-plus-amplified-noise matrix; ``"c"`` uses the signal
    matrix itself, as the ratio is literally printed in the source formulation.
    """
    if denominator not in ("c", "d"):
        raise ValueError("denominator must be 'c' or 'd'")
    A = A.A if isinstance(A, Beamformer) else A
    out = []
    for Hs, Hd, p, s2 in ((ch.H1, ch.H2, cfg.p1, cfg.sigma2_sq), (ch.H2, ch.H1, cfg.p2, cfg.sigma1_sq)):
        G = Hd.conj().T @ A @ Hs
        Q = p * (G @ Theta1 @ G.conj().T)
        if denominator == "c":
            out.append((Q, Q))
            continue
        K = Hd.conj().T @ A
        D = cfg.sigmar_sq * (K @ K.conj().T)
        D[-1, -1] += s2
        out.append((Q, D))
    return tuple(out)


def gfp_eta(Theta2, Theta1, A, ch: ChannelSet, cfg: NetworkConfig, denominator: str = "d"):
    """``eta = sqrt(tr(Theta2 Q)) / tr(Theta2 Den)`` for both directions."""
    etas = []
    for Q, Den in theta2_kernels(A, Theta1, ch, cfg, denominator):
        den = _tr(Den, Theta2)
        if not den > 0:
            raise DegenerateChannelError("nonpositive ratio denominator")
        etas.append(np.sqrt(max(_tr(Q, Theta2), 0.0)) / den)
    return tuple(etas)


def gfp_bound(eta: float, num: float, den: float) -> float:
    """Right side ``1 + 2 eta sqrt(num) - eta^2 den``; equals ``1 + num/den`` at ``eta = sqrt(num)/den``."""
    return 1.0 + 2.0 * eta * np.sqrt(num) - eta**2 * den


# -- penalized SDP steps --------------------------------------------------------------


@dataclass(frozen=True)
class PenaltyOptions:
    mu0: float = 1.0
    zeta: float = 2.0
    zeta_max: float = 1e6
    obj_tol: float = 1e-4
    xi_tol: float = 1e-6
    max_inner: int = 40


@dataclass
class PenaltyState:
    mu: float
    zeta: float
    zeta_max: float
    xi: float = float("inf")
    inner: int = 0

    @classmethod
    def start(cls, opts: PenaltyOptions) -> "PenaltyState":
        return cls(opts.mu0, opts.zeta, opts.zeta_max)

    def advance(self) -> None:
        self.mu = min(self.zeta * self.mu, self.zeta_max)
        self.inner += 1


@dataclass(frozen=True)
class PenaltyStep:
    Theta: np.ndarray
    xi: float  # slack value returned by the solver
    objective: float  # t - mu * xi of the convexified problem
    t: float
    status: str
    ok: bool


class _LiftedProgram:
    """Unit-diagonal lifted phase matrix plus the linearized rank-one penalty."""

    def __init__(self, n1: int, theta_tilde: np.ndarray, mu: float):
        self.n1 = n1
        p = self.prog = conic.ConicProgram()
        self.X = p.psd(2 * n1, name="Theta")
        for i in range(n1):
            e = np.zeros(2 * n1)
            e[i] = e[i + n1] = 0.5
            p.add_constraint([(self.X, e)], "==", 1.0)
        self.xi = p.nonneg(1, name="xi")
        v = lambda_max_surrogate(theta_tilde).eigvec
        # n1 - v^H Theta v <= xi
        p.add_constraint([(self.X, -self.coef(np.outer(v, v.conj()))), (self.xi, -1.0)], "<=", -float(n1))
        self.t = p.free(1, name="t")
        self.mu = mu
        p.maximize([(self.t, 1.0), (self.xi, -mu)])

    @staticmethod
    def coef(Q: np.ndarray) -> np.ndarray:
        """Real coefficient with ``tr(Q Theta) = <coef, X>``."""
        Qh = (Q + Q.conj().T) / 2.0
        return conic.lift_matrix(Qh) / 2.0

    def log_bound(self, s_ref: float):
        """Add ``t <= log2(s)/2`` through its minorant at ``s_ref``; return ``sigma``'s terms.

        With ``sigma = s / s_ref`` and ``w >= 1/sigma``:
        ``t <= log2(s_ref)/2 + (1 - w) / (2 ln 2)``.  The cone ``(sigma + w,
        sigma - w, 2)`` encodes ``sigma * w >= 1``.
        """
        r = self.prog.soc(3, name="sigma_w")
        self.prog.fix(r, 2, 2.0)
        # w = (r0 - r1)/2
        self.prog.add_constraint([(self.t, 1.0), (r, [1 / (4 * LN2), -1 / (4 * LN2), 0.0])], "<=",
                                 0.5 * np.log2(s_ref) + 1 / (2 * LN2))
        return (r, np.array([0.5, 0.5, 0.0]))  # sigma = (r0 + r1)/2

    def solve(self, tol: float):
        sol = conic.solve(self.prog, tol=tol)
        if not sol.usable(max(tol, 1e-6)):
            return sol, None
        return sol, conic.unlift_hermitian(sol.value(self.X))


def _finish(sol, Theta, lp, fallback):
    if Theta is None:
        log.debug("penalty SDP: %s", sol.status)
        return PenaltyStep(fallback, np.nan, np.nan, np.nan, sol.status, False)
    xi = float(sol.value(lp.xi)[0])
    t = float(sol.value(lp.t)[0])
    return PenaltyStep(Theta, xi, sol.objective, t, sol.status, True)


def theta1_penalty_step(A, Theta2, state: PenaltyState, Theta1_tilde, ch: ChannelSet, cfg: NetworkConfig,
                        tol: float = conic.DEFAULT_TOL) -> PenaltyStep:
    n1 = ch.n + 1
    lp = _LiftedProgram(n1, Theta1_tilde, state.mu)
    for B, den in theta1_kernels(A, Theta2, ch, cfg):
        s_ref = 1.0 + max(_tr(B, Theta1_tilde) / den, 0.0)
        r, sig = lp.log_bound(s_ref)
        # sigma <= (1 + tr(Theta B)/den) / s_ref
        lp.prog.add_constraint([(r, sig), (lp.X, -lp.coef(B) / (den * s_ref))], "<=", 1.0 / s_ref)
    Aa = A.A if isinstance(A, Beamformer) else A
    budget = cfg.pr - cfg.sigmar_sq * float(np.sum(np.abs(Aa) ** 2))
    lp.prog.add_constraint([(lp.X, lp.coef(power_kernel(A, ch, cfg)) / cfg.pr)], "<=", budget / cfg.pr)
    sol, Theta = lp.solve(tol)
    step = _finish(sol, Theta, lp, Theta1_tilde)
    state.xi = step.xi
    return step


def theta2_penalty_step(A, Theta1, state: PenaltyState, Theta2_tilde, ch: ChannelSet, cfg: NetworkConfig,
                        denominator: str = "d", tol: float = conic.DEFAULT_TOL) -> PenaltyStep:
    """Penalized SDP for the second slot with quadratic-transform ratio bounds.

    With ``x = num/num~``, ``y = den/den~`` and ``r~ = num~/den~`` the
    transformed constraint ``1 + 2 eta sqrt(num) - eta^2 den`` equals
    ``1 + r~ (2 sqrt(x) - y)``; ``u <= sqrt(x)`` is the cone ``(x + 1, x - 1, 2u)``.
    """
    n1 = ch.n + 1
    lp = _LiftedProgram(n1, Theta2_tilde, state.mu)
    for Q, Den in theta2_kernels(A, Theta1, ch, cfg, denominator):
        num_t, den_t = _tr(Q, Theta2_tilde), _tr(Den, Theta2_tilde)
        if not (num_t > 0 and den_t > 0):
            return PenaltyStep(Theta2_tilde, np.nan, np.nan, np.nan, conic.INFEASIBLE, False)
        r_t = num_t / den_t
        s_ref = 1.0 + r_t
        r, sig = lp.log_bound(s_ref)
        q = lp.prog.soc(3, name="sqrt")
        cq = lp.coef(Q) / num_t
        lp.prog.add_constraint([(q, [1.0, 0.0, 0.0]), (lp.X, -cq)], "==", 1.0)
        lp.prog.add_constraint([(q, [0.0, 1.0, 0.0]), (lp.X, -cq)], "==", -1.0)
        # sigma - (r~/s~) * 2u + (r~/s~) * y <= 1/s~, with 2u = q2
        lp.prog.add_constraint([(r, sig), (q, [0.0, 0.0, -r_t / s_ref]),
                                (lp.X, lp.coef(Den) * (r_t / (den_t * s_ref)))], "<=", 1.0 / s_ref)
    sol, Theta = lp.solve(tol)
    step = _finish(sol, Theta, lp, Theta2_tilde)
    state.xi = step.xi
    return step


def penalty_loop(step_fn, Theta_tilde, opts: PenaltyOptions, warm_start: str = "sdr"):
    """Run penalized steps with a growing ``mu`` until the slack and objective settle.

    ``step_fn(state, Theta_tilde) -> PenaltyStep``.  With ``warm_start="sdr"``
    the loop starts from the unpenalized relaxation (``mu = 0``) instead of
    ``Theta_tilde`` itself.  Returns ``(Theta, state, steps)``.
    """
    if warm_start not in ("sdr", "previous"):
        raise ValueError(f"unknown warm start {warm_start!r}")
    Theta = Theta_tilde
    if warm_start == "sdr":
        relaxed = step_fn(PenaltyState(0.0, opts.zeta, opts.zeta_max), Theta_tilde)
        if relaxed.ok:
            Theta = relaxed.Theta
    state = PenaltyState.start(opts)
    steps = []
    prev = None
    while state.inner < opts.max_inner:
        st = step_fn(state, Theta)
        steps.append(st)
        if not st.ok:
            break
        Theta = st.Theta
        done = prev is not None and abs(st.objective - prev) <= opts.obj_tol and st.xi <= opts.xi_tol
        prev = st.objective
        state.advance()
        if done:
            break
    return Theta, state, steps


# -- outer loop -------------------------------------------------------------------------


@dataclass(frozen=True)
class OnsOptions:
    delta: float = 1e-3
    max_outer: int = 50
    safeguard: bool = True
    init: str = "aligned"
    seed: int | None = None
    denominator: str = "d"
    warm_start: str = "sdr"
    inner_max: int = 1  # penalty-loop repeats per phase subproblem
    inner_tol: float = 1e-6
    refit_power: bool = True
    penalty: PenaltyOptions = PenaltyOptions()
    tol: float = conic.DEFAULT_TOL


def _try_extract(Theta):
    try:
        return extract_rank_one(Theta)
    except RankOneError:
        return None


@dataclass(frozen=True)
class LiftedInfo:
    state: PenaltyState
    Theta: np.ndarray


def _ons_iterate(th1, th2, ch, cfg):
    try:
        bf, _ = ons_beamformer(th1, th2, ch, cfg)
    except DegenerateChannelError:
        return None
    return Iterate(bf, th1, th2, evaluate(bf, th1, th2, ch, cfg))


def run_ons_sdp_psca(ch: ChannelSet, cfg: NetworkConfig, opts: OnsOptions = OnsOptions()):
    """Alternate the one-step beamformer and the two penalized SDP loops.

    Returns ``(beamformer, theta1, theta2, trace)``.
    """
    start = time.perf_counter()
    th1, th2 = initial_phases(ch, opts.init, opts.seed)
    cur = _ons_iterate(th1, th2, ch, cfg)
    if cur is None:
        raise DegenerateChannelError("one-step beamformer undefined at the initial phases")
    trace = RunTrace("ons", TRACE_COLUMNS, initial_rate=cur.rate)

    def step1(it: Iterate):
        T2 = lift_phase(it.theta2)
        T, st, _ = penalty_loop(
            lambda s, Tt: theta1_penalty_step(it.bf, T2, s, Tt, ch, cfg, opts.tol),
            lift_phase(it.theta1), opts.penalty, opts.warm_start)
        info = LiftedInfo(st, T)
        new = _try_extract(T)
        if new is None:
            return None, info
        bf = (refit if opts.refit_power else feasible)(it.bf, new, ch, cfg)
        return Iterate(bf, new, it.theta2, evaluate(bf, new, it.theta2, ch, cfg)), info

    def step2(it: Iterate):
        T1 = lift_phase(it.theta1)
        T, st, _ = penalty_loop(
            lambda s, Tt: theta2_penalty_step(it.bf, T1, s, Tt, ch, cfg, opts.denominator, opts.tol),
            lift_phase(it.theta2), opts.penalty, opts.warm_start)
        info = LiftedInfo(st, T)
        new = _try_extract(T)
        if new is None:
            return None, info
        return Iterate(it.bf, it.theta1, new, evaluate(it.bf, it.theta1, new, ch, cfg)), info

    def sweep(it: Iterate):
        it, r1 = refine(step1, it, opts.inner_max, opts.inner_tol, opts.safeguard)
        it, r2 = refine(step2, it, opts.inner_max, opts.inner_tol, opts.safeguard)
        return it, (r1, r2)

    for i in range(1, opts.max_outer + 1):
        fresh = _ons_iterate(cur.theta1, cur.theta2, ch, cfg) if i > 1 else cur
        R_prev = cur.rate
        cur, (r1, r2), fresh_kept = guarded_sweep(sweep, cur, fresh, opts.safeguard)
        trace.safeguard_hits += (not fresh_kept) + r1.rejected + r2.rejected
        i1, i2 = r1.info, r2.info
        pair = snr_pair(cur.bf, cur.theta1, cur.theta2, ch, cfg)
        trace.append(iteration=i, r12=pair.r12, r21=pair.r21, min_rate=pair.min_rate,
                     xi1=i1.state.xi, xi2=i2.state.xi, mu1=i1.state.mu, mu2=i2.state.mu,
                     lambda_ratio_1=lambda_ratio(i1.Theta), lambda_ratio_2=lambda_ratio(i2.Theta),
                     inner1=i1.state.inner, inner2=i2.state.inner, safeguard_hits=trace.safeguard_hits)
        if abs(cur.rate - R_prev) <= opts.delta:
            trace.converged = True
            break
    trace.wall_time = time.perf_counter() - start
    return cur.bf, cur.theta1, cur.theta2, trace
