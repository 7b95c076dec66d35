"""Monte-Carlo sweeps, convergence traces and closed-form complexity estimates.

Channel draws are seeded by ``(seed, trial, attempt)`` only, so every
algorithm at a grid point sees the same realization, and grid points of a
power sweep share realizations too.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baselines import random_phase_baseline, relay_only_baseline
from .channel import ChannelSet, NetworkConfig, sample_channels
from .errors import ConfigError, DegenerateChannelError, TrialFailure
from .ons_sdp_psca import OnsOptions, run_ons_sdp_psca
from .trace import RunTrace
from .zf_sca import LcOptions, run_lc_zf_sca

log = logging.getLogger(__name__)

ALGORITHMS = ("lc", "ons", "random", "relay")
SWEEP_PARAMS = ("p_dbm", "m", "n")
CSV_COLUMNS = ("param", "value", "trial", "algo", "rate_bps_hz", "iters", "fail")
SUMMARY_COLUMNS = ("param", "value", "algo", "samples", "failures", "median", "mean", "std")


# -- complexity ----------------------------------------------------------------------


def _check_counts(m, n, d, eps):
    if min(m, n, d) < 1 or not 0 < eps < 1:
        raise ValueError("need positive m, n, d and 0 < eps < 1")


def flop_count_lc(m: int, n: int, d1: float, eps: float) -> float:
    """FLOP estimate of the low-complexity method: ``d1`` outer iterations at accuracy ``eps``."""
    _check_counts(m, n, d1, eps)
    n1 = n2 = n + 2
    beam = m**3 + 11 * m**2 + 10 * m * n + 7 * m + 6
    sub1 = n1 * math.sqrt(7) * ((n + 1) ** 2 + n**2 + n1**2 + 3 * n1 + 3)
    sub2 = n2 * math.sqrt(5) * (n**2 + n2**2 + 3 * n2 + 3)
    return d1 * (beam + sub1 + sub2) * math.log(1 / eps)


def flop_count_ons(m: int, n: int, d2: float, eps: float) -> float:
    """FLOP estimate of the SDP-based method."""
    _check_counts(m, n, d2, eps)
    k = (n + 1) ** 2 + 2
    beam = (2 * (n + 1) ** 3 + 4 * m**2 * n + 4 * m * n**2 + 9 * m**2 - n**2
            + 6 * m * n + 14 * m + 3 * n + 3)
    sub1 = k * math.sqrt(2 * n + 7) * ((n + 1) ** 3 + k * ((n + 1) ** 2 + n + 6) + k**2 + n + 6)
    sub2 = k * math.sqrt(2 * n + 6) * ((n + 1) ** 3 + k * ((n + 1) ** 2 + n + 5) + k**2 + n + 5)
    return d2 * (beam + sub1 + sub2) * math.log(1 / eps)


def complexity_table(m: int, n_values, d: float, eps: float):
    """Rows ``(n, lc_flops, ons_flops)``."""
    return [(n, flop_count_lc(m, n, d, eps), flop_count_ons(m, n, d, eps)) for n in n_values]


# -- single trials -------------------------------------------------------------------


@dataclass
class AlgoOutcome:
    rate: float = float("nan")
    iters: int = 0
    failed: bool = False
    trace: RunTrace | None = None


@dataclass
class TrialOutcome:
    trial: int
    attempts: int
    checksum: str
    results: dict = field(default_factory=dict)


def draw_channels(cfg: NetworkConfig, seed: int, trial: int, attempt: int = 0) -> ChannelSet:
    return sample_channels(cfg, np.random.default_rng([seed, trial, attempt]))


def _run_algo(algo, ch, cfg, rng, lc_opts, ons_opts) -> AlgoOutcome:
    if algo == "lc":
        _, _, _, tr = run_lc_zf_sca(ch, cfg, lc_opts)
        return AlgoOutcome(tr.final_rate, tr.iterations, False, tr)
    if algo == "ons":
        _, _, _, tr = run_ons_sdp_psca(ch, cfg, ons_opts)
        return AlgoOutcome(tr.final_rate, tr.iterations, False, tr)
    if algo == "random":
        return AlgoOutcome(random_phase_baseline(ch, cfg, rng)[3], 1)
    if algo == "relay":
        return AlgoOutcome(relay_only_baseline(ch, cfg)[1], 1)
    raise ConfigError(f"unknown algorithm {algo!r}")


def run_trial(cfg: NetworkConfig, seed: int, trial: int, algorithms=ALGORITHMS,
              lc_opts: LcOptions = LcOptions(), ons_opts: OnsOptions = OnsOptions(),
              max_attempts: int = 3) -> TrialOutcome:
    """All ``algorithms`` on one shared channel draw.

    A degenerate draw is replaced by a fresh one (for every algorithm, so the
    comparison stays paired); after ``max_attempts`` draws ``TrialFailure``.
    """
    for attempt in range(max_attempts):
        ch = draw_channels(cfg, seed, trial, attempt)
        rng = np.random.default_rng([seed, trial, attempt, 1])
        try:
            results = {a: _run_algo(a, ch, cfg, rng, lc_opts, ons_opts) for a in algorithms}
        except DegenerateChannelError as exc:
            log.warning("trial %d attempt %d: degenerate channel (%s); redrawing", trial, attempt, exc)
            continue
        return TrialOutcome(trial, attempt + 1, ch.checksum(), results)
    raise TrialFailure(f"trial {trial}: {max_attempts} degenerate channel draws in a row")


# -- sweeps --------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepSpec:
    param: str
    values: tuple
    trials: int = 20
    base: NetworkConfig = NetworkConfig()
    seed: int = 0
    algorithms: tuple = ALGORITHMS
    lc: LcOptions = LcOptions()
    ons: OnsOptions = OnsOptions()
    max_attempts: int = 3

    def __post_init__(self):
        if self.param not in SWEEP_PARAMS:
            raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMS}")
        if not self.values:
            raise ConfigError("sweep grid is empty")
        if self.trials < 1:
            raise ConfigError("need at least one trial")
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad:
            raise ConfigError(f"unknown algorithms {sorted(bad)}")

    def config_at(self, value) -> NetworkConfig:
        if self.param == "p_dbm":
            return self.base.with_power_dbm(float(value))
        if self.param == "m":
            return self.base.with_sizes(m=int(value))
        return self.base.with_sizes(n=int(value))


@dataclass
class SweepResult:
    spec: SweepSpec
    outcomes: dict = field(default_factory=dict)  # (value, trial) -> TrialOutcome | None

    def samples(self, value, algo) -> list:
        out = []
        for t in range(self.spec.trials):
            o = self.outcomes.get((value, t))
            if o is not None and not o.results[algo].failed:
                out.append(o.results[algo].rate)
        return out

    def failures(self, value) -> int:
        return sum(self.outcomes.get((value, t)) is None for t in range(self.spec.trials))

    def median(self, value, algo) -> float:
        s = self.samples(value, algo)
        return float(np.median(s)) if s else float("nan")

    def mean(self, value, algo) -> float:
        s = self.samples(value, algo)
        return float(np.mean(s)) if s else float("nan")

    def std(self, value, algo) -> float:
        s = self.samples(value, algo)
        return float(np.std(s)) if s else float("nan")

    def medians(self, algo) -> list:
        return [self.median(v, algo) for v in self.spec.values]

    def rows(self):
        for v in self.spec.values:
            for t in range(self.spec.trials):
                o = self.outcomes.get((v, t))
                for a in self.spec.algorithms:
                    if o is None:
                        yield (self.spec.param, v, t, a, "nan", 0, 1)
                    else:
                        r = o.results[a]
                        yield (self.spec.param, v, t, a, repr(float(r.rate)), r.iters, int(r.failed))

    def summary_rows(self):
        for v in self.spec.values:
            for a in self.spec.algorithms:
                yield (self.spec.param, v, a, len(self.samples(v, a)), self.failures(v),
                       repr(self.median(v, a)), repr(self.mean(v, a)), repr(self.std(v, a)))

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerows(self.rows())

    def write_summary_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        w.writerows(self.summary_rows())


def _work_item(args):
    spec, value, trial = args
    try:
        return run_trial(spec.config_at(value), spec.seed, trial, spec.algorithms,
                         spec.lc, spec.ons, spec.max_attempts)
    except TrialFailure as exc:
        log.error("%s=%s: %s", spec.param, value, exc)
        return None


def run_sweep(spec: SweepSpec, workers: int = 1, cache: dict | None = None) -> SweepResult:
    """Every (grid value, trial) pair; failures are logged and counted, not raised.

    ``cache`` maps ``(repr(config), seed, trial, algorithms)`` to outcomes so
    repeated points across sweeps are computed once.
    """
    items = [(spec, v, t) for v in spec.values for t in range(spec.trials)]
    keys = [(repr(spec.config_at(v)), spec.seed, t, spec.algorithms, spec.lc, spec.ons) for _, v, t in items]
    cache = {} if cache is None else cache
    todo = [(it, k) for it, k in zip(items, keys) if k not in cache]
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(workers) as pool:
            done = list(pool.map(_work_item, [it for it, _ in todo]))
    else:
        done = [_work_item(it) for it, _ in todo]
    for (_, k), o in zip(todo, done):
        cache[k] = o
    result = SweepResult(spec)
    for (_, v, t), k in zip(items, keys):
        result.outcomes[(v, t)] = cache[k]
    return result


def convergence_trace(cfg: NetworkConfig, p_dbm: float, seed: int, algorithm: str,
                      lc_opts: LcOptions = LcOptions(), ons_opts: OnsOptions = OnsOptions(),
                      max_attempts: int = 3) -> RunTrace:
    """One fully logged run of ``algorithm`` ("lc" or "ons") at ``p_dbm``."""
    if algorithm not in ("lc", "ons"):
        raise ConfigError("convergence traces exist only for lc and ons")
    out = run_trial(cfg.with_power_dbm(p_dbm), seed, 0, (algorithm,), lc_opts, ons_opts, max_attempts)
    return out.results[algorithm].trace
