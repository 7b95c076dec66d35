import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from irsrelay.channel import NetworkConfig, sample_channels
from irsrelay.errors import RankOneError
from irsrelay.metrics import is_feasible_phase, relay_tx_power, snr_pair
from irsrelay.ons_sdp_psca import (OnsOptions, PenaltyOptions, PenaltyState, TRACE_COLUMNS,
                                   extract_rank_one, gfp_bound, gfp_eta, lambda_max_surrogate,
                                   lambda_ratio, lift_phase, ons_beamformer, penalty_loop,
                                   power_kernel, run_ons_sdp_psca, theta1_kernels,
                                   theta1_penalty_step, theta2_kernels, theta2_penalty_step)
from conftest import random_phases

seeds = st.integers(0, 2**32 - 1)


def _setup(seed, n=3, m=2):
    rng = np.random.default_rng(seed)
    cfg = NetworkConfig.from_dbm(30.0, m=m, n=n)
    ch = sample_channels(cfg, rng)
    return rng, cfg, ch, random_phases(rng, n), random_phases(rng, n)


def _tr(Q, T):
    return np.trace(Q @ T).real


@given(seeds)
def test_ons_power_and_factor_structure(seed):
    _, cfg, ch, th1, th2 = _setup(seed)
    bf, f = ons_beamformer(th1, th2, ch, cfg)
    assert relay_tx_power(bf, th1, ch, cfg) == pytest.approx(cfg.pr, rel=1e-9)
    assert np.allclose(f.U11.conj().T @ f.U11, np.eye(2), atol=1e-10)
    assert np.allclose(f.V21.conj().T @ f.V21, np.eye(2), atol=1e-10)
    assert np.linalg.norm(f.Upsilon, "fro") ** 2 == pytest.approx(2.0, abs=1e-10)
    assert np.allclose(bf.A, f.rho * f.Upsilon)
    assert np.all(np.diff(np.diag(f.S11)) <= 0)


@given(seeds)
def test_ons_rank_at_four_antennas(seed):
    _, cfg, ch, th1, th2 = _setup(seed, m=4)
    bf, _ = ons_beamformer(th1, th2, ch, cfg)
    s = np.linalg.svd(bf.A, compute_uv=False)
    assert s[2] <= 1e-10 * np.linalg.norm(bf.A)


@given(seeds)
def test_rho_matches_trace_formula(seed):
    _, cfg, ch, th1, th2 = _setup(seed)
    _, f = ons_beamformer(th1, th2, ch, cfg)
    T1 = lift_phase(th1)
    Q = power_kernel(f.Upsilon, ch, cfg)
    rho = np.sqrt(cfg.pr / (_tr(Q, T1) + cfg.sigmar_sq * np.linalg.norm(f.Upsilon) ** 2))
    assert f.rho == pytest.approx(rho, rel=1e-10)


@given(seeds)
def test_lifted_traces_match_vector_forms(seed):
    _, cfg, ch, th1, th2 = _setup(seed)
    bf, _ = ons_beamformer(th1, th2, ch, cfg)
    T1, T2 = lift_phase(th1), lift_phase(th2)
    pair = snr_pair(bf, th1, th2, ch, cfg)
    (B12, den12), (B21, den21) = theta1_kernels(bf, T2, ch, cfg)
    row = th2.conj() @ ch.H2.conj().T @ bf.A
    assert den12 == pytest.approx(np.linalg.norm(row) ** 2 * cfg.sigmar_sq + cfg.sigma2_sq, rel=1e-10)
    assert _tr(B12, T1) / den12 == pytest.approx(pair.snr12, rel=1e-10)
    assert _tr(B21, T1) / den21 == pytest.approx(pair.snr21, rel=1e-10)
    (Q12, D12), (Q21, D21) = theta2_kernels(bf, T1, ch, cfg, "d")
    assert _tr(Q12, T2) / _tr(D12, T2) == pytest.approx(pair.snr12, rel=1e-10)
    assert _tr(Q21, T2) / _tr(D21, T2) == pytest.approx(pair.snr21, rel=1e-10)
    want = relay_tx_power(bf, th1, ch, cfg)
    got = _tr(power_kernel(bf, ch, cfg), T1) + cfg.sigmar_sq * np.linalg.norm(bf.A) ** 2
    assert got == pytest.approx(want, rel=1e-10)


def test_lambda_surrogate_examples():
    th = random_phases(np.random.default_rng(0), 4)
    T = lift_phase(th)
    s = lambda_max_surrogate(T)
    assert np.trace(T).real - s.value == pytest.approx(0.0, abs=1e-10)
    s = lambda_max_surrogate(np.eye(3))
    assert s.value == pytest.approx(1.0) and 3 - s.value == pytest.approx(2.0)
    assert lambda_ratio(T) == pytest.approx(1.0)


@given(seeds)
def test_lambda_surrogate_minorant(seed):
    rng = np.random.default_rng(seed)
    def psd():
        Z = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
        return Z @ Z.conj().T
    s = lambda_max_surrogate(psd())
    for _ in range(100):
        T = psd()
        lam = np.linalg.eigvalsh(T)[-1]
        assert s(T) <= lam * (1 + 1e-12)
        assert np.trace(T).real - lam >= -1e-12


def test_gfp_scalar_example():
    assert np.sqrt(4.0) / 2.0 == 1.0
    assert gfp_bound(1.0, 4.0, 2.0) == pytest.approx(1 + 4.0 / 2.0)


@given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_gfp_tight_and_dominated(x, y, x2, y2):
    eta = np.sqrt(x) / y
    assert gfp_bound(eta, x, y) == pytest.approx(1 + x / y, rel=1e-10)
    assert gfp_bound(eta, x2, y2) <= (1 + x2 / y2) * (1 + 1e-12)


@given(seeds)
def test_gfp_eta_at_iterate(seed):
    _, cfg, ch, th1, th2 = _setup(seed)
    bf, _ = ons_beamformer(th1, th2, ch, cfg)
    T1, T2 = lift_phase(th1), lift_phase(th2)
    etas = gfp_eta(T2, T1, bf, ch, cfg)
    assert all(e > 0 for e in etas)
    pair = snr_pair(bf, th1, th2, ch, cfg)
    for eta, (Q, D), snr in zip(etas, theta2_kernels(bf, T1, ch, cfg), (pair.snr12, pair.snr21)):
        assert gfp_bound(eta, _tr(Q, T2), _tr(D, T2)) == pytest.approx(1 + snr, rel=1e-10)
    # literal C-denominator variant: ratio is one, so eta = 1/sqrt(num)
    for eta, (Q, _) in zip(gfp_eta(T2, T1, bf, ch, cfg, "c"), theta2_kernels(bf, T1, ch, cfg, "c")):
        assert eta == pytest.approx(1 / np.sqrt(_tr(Q, T2)), rel=1e-10)


def test_bad_denominator_rejected():
    _, cfg, ch, th1, th2 = _setup(0)
    with pytest.raises(ValueError):
        theta2_kernels(np.eye(2), lift_phase(th1), ch, cfg, "x")


def test_extract_rank_one_exact_and_idempotent():
    th = random_phases(np.random.default_rng(4), 5)
    v = extract_rank_one(lift_phase(th))
    assert np.allclose(v, th, atol=1e-12) and v[-1] == 1
    assert is_feasible_phase(v)
    assert np.allclose(extract_rank_one(lift_phase(v)), v, atol=1e-12)


def test_extract_rejects_full_rank():
    with pytest.raises(RankOneError) as exc:
        extract_rank_one(np.eye(4))
    assert exc.value.ratio == pytest.approx(0.25)


def test_penalty_schedule():
    opts = PenaltyOptions()
    s = PenaltyState.start(opts)
    mus = []
    for _ in range(30):
        mus.append(s.mu)
        s.advance()
    assert mus[0] == 1.0 and all(b >= a for a, b in zip(mus, mus[1:]))
    assert max(mus) <= opts.zeta_max and mus[-1] == opts.zeta_max


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_penalty_steps_feasible_with_unit_diagonal(seed):
    _, cfg, ch, th1, th2 = _setup(seed)
    bf, _ = ons_beamformer(th1, th2, ch, cfg)
    T1, T2 = lift_phase(th1), lift_phase(th2)
    for step in (theta1_penalty_step(bf, T2, PenaltyState(1.0, 2.0, 1e6), T1, ch, cfg),
                 theta2_penalty_step(bf, T1, PenaltyState(1.0, 2.0, 1e6), T2, ch, cfg)):
        assert step.ok
        assert np.allclose(np.diag(step.Theta).real, 1.0, atol=1e-8)
        assert np.linalg.eigvalsh(step.Theta)[0] >= -1e-8


def test_huge_penalty_keeps_rank_one():
    _, cfg, ch, th1, th2 = _setup(3)
    bf, _ = ons_beamformer(th1, th2, ch, cfg)
    step = theta2_penalty_step(bf, lift_phase(th1), PenaltyState(1e6, 2.0, 1e6), lift_phase(th2), ch, cfg)
    assert step.ok and step.xi <= 1e-6
    assert lambda_ratio(step.Theta) >= 1 - 1e-6


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_penalty_loop_drives_slack_to_zero(seed):
    _, cfg, ch, th1, th2 = _setup(seed)
    bf, _ = ons_beamformer(th1, th2, ch, cfg)
    T1 = lift_phase(th1)
    fn = lambda s, Tt: theta2_penalty_step(bf, T1, s, Tt, ch, cfg)
    Theta, state, steps = penalty_loop(fn, lift_phase(th2), PenaltyOptions())
    assert state.inner <= 30
    assert steps[-1].xi < 1e-6
    assert lambda_ratio(Theta) >= 1 - 1e-6


def test_objective_nondecreasing_at_fixed_mu():
    _, cfg, ch, th1, th2 = _setup(6)
    bf, _ = ons_beamformer(th1, th2, ch, cfg)
    T2 = lift_phase(th2)
    T = lift_phase(th1)
    objs = []
    for _ in range(6):
        step = theta1_penalty_step(bf, T2, PenaltyState(5.0, 1.0, 5.0), T, ch, cfg)
        assert step.ok
        objs.append(step.objective)
        T = step.Theta
    assert all(b >= a - 1e-6 for a, b in zip(objs, objs[1:]))


def test_penalty_loop_unknown_warm_start():
    with pytest.raises(ValueError):
        penalty_loop(lambda s, T: None, np.eye(2), PenaltyOptions(), warm_start="cold")


@pytest.mark.parametrize("warm_start", ["sdr", "previous"])
def test_run_monotone_rank_one_and_feasible(warm_start):
    _, cfg, ch, _, _ = _setup(21, n=4)
    bf, th1, th2, tr = run_ons_sdp_psca(ch, cfg, OnsOptions(max_outer=4, warm_start=warm_start))
    assert 1 <= tr.iterations <= 4
    seq = [tr.initial_rate] + tr.min_rates
    assert all(b >= a for a, b in zip(seq, seq[1:]))
    assert is_feasible_phase(th1) and is_feasible_phase(th2)
    assert relay_tx_power(bf, th1, ch, cfg) <= cfg.pr * (1 + 1e-9)
    assert tuple(tr.columns) == TRACE_COLUMNS
    for row in tr.rows:
        assert row["lambda_ratio_1"] >= 1 - 1e-6 and row["lambda_ratio_2"] >= 1 - 1e-6
