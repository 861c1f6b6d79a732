import numpy as np
import pytest

from mmqst import (ConfigurationError, PulsePair, SampledSignal, Scenario,
                   ChannelSpec, build_case, evolve_leakage,
                   evolve_linear_heisenberg, evolve_single_excitation,
                   evolve_with_loss, richardson_check)


def _zero_pair(scenario):
    grid = scenario.grid
    return PulsePair(gA=SampledSignal.zeros(grid),
                     gB_tilde=SampledSignal.zeros(grid),
                     t_f=grid.dt * (grid.n_steps // 2),
                     clamp_eps=1e-6, g_max=1.0)


def test_zero_pulses_leave_state_untouched(fast_scenario):
    traj = evolve_single_excitation(fast_scenario, _zero_pair(fast_scenario))
    assert np.all(traj.alpha == 1.0 + 0.0j)
    assert not np.any(traj.beta)
    assert not np.any(traj.c_modes)


def test_norm_conserved(fast_traj):
    span = fast_traj.grid.t_end - fast_traj.grid.t_start
    assert np.max(np.abs(fast_traj.norm - 1.0)) < 1e-9 * max(span, 1.0)


def test_initial_conditions(fast_traj):
    assert fast_traj.alpha[0] == 1.0 + 0.0j
    assert fast_traj.beta[0] == 0.0 + 0.0j
    assert not np.any(fast_traj.c_modes[:, 0])


def test_receiver_silent_before_delay(fast_traj):
    m = fast_traj.window_steps
    assert np.max(np.abs(fast_traj.beta[: m + 1])) == 0.0


def test_parity_gauge_invariance(fast_scenario, fast_run, fast_traj):
    """Flipping all parities is a relabeling absorbed by the phase convention
    and cannot change any population."""
    spec = fast_scenario.channel
    flipped = ChannelSpec(delta=spec.delta, parity=-spec.parity, fsr=spec.fsr,
                          t0=spec.t0,
                          omega0_phase=spec.omega0_phase + np.pi)
    scen2 = Scenario(channel=flipped, case_label=fast_scenario.case_label,
                     grid=fast_scenario.grid, ga_params=fast_scenario.ga_params)
    traj2 = evolve_single_excitation(scen2, fast_run.pair)
    assert np.allclose(np.abs(traj2.alpha), np.abs(fast_traj.alpha), atol=1e-12)
    assert np.allclose(np.abs(traj2.beta), np.abs(fast_traj.beta), atol=1e-12)


def test_lossless_limit_is_exact(fast_scenario, fast_run, fast_traj):
    traj = evolve_with_loss(fast_scenario, fast_run.pair, 0.0, 0.0)
    assert np.array_equal(traj.alpha, fast_traj.alpha)
    assert np.array_equal(traj.beta, fast_traj.beta)


def test_loss_rejects_negative_rates(fast_scenario, fast_run):
    with pytest.raises(ConfigurationError):
        evolve_with_loss(fast_scenario, fast_run.pair, -1e-3, 0.0)


def test_lossy_norm_decreases(fast_scenario, fast_run):
    traj = evolve_with_loss(fast_scenario, fast_run.pair, 1e-3, 5e-4)
    diffs = np.diff(traj.norm)
    assert np.all(diffs <= 1e-12)
    assert traj.norm[-1] < 1.0


def test_leakage_zero_er_reproduces_baseline(fast_scenario, fast_run, fast_traj):
    rep = evolve_leakage(fast_scenario, fast_run.pair, er=0.0)
    baseline = 1.0 - abs(fast_traj.beta_tilde()[-1]) ** 2
    assert rep.inefficiency == pytest.approx(baseline, abs=1e-9)
    assert rep.inefficiency == rep.baseline_inefficiency


def test_leakage_linear_in_er(fast_scenario, fast_run):
    r1 = evolve_leakage(fast_scenario, fast_run.pair, er=0.01)
    r2 = evolve_leakage(fast_scenario, fast_run.pair, er=0.02)
    base = r1.baseline_inefficiency
    ratio = (r2.inefficiency - base) / (r1.inefficiency - base)
    assert ratio == pytest.approx(2.0, abs=0.2)


def test_leakage_sector_norm_conserved(fast_scenario, fast_run):
    rep = evolve_leakage(fast_scenario, fast_run.pair, er=0.01)
    assert rep.sector2_norm_drift < 1e-8


def test_leakage_rejects_bad_fraction(fast_scenario, fast_run):
    with pytest.raises(ConfigurationError):
        evolve_leakage(fast_scenario, fast_run.pair, er=1.5)


def test_heisenberg_zero_pulses_identity(fast_scenario):
    run = evolve_linear_heisenberg(fast_scenario, _zero_pair(fast_scenario))
    dim = fast_scenario.channel.n_modes + 2
    assert np.array_equal(run.final, np.eye(dim))


def test_heisenberg_unitary_and_matches_single_excitation(
        fast_scenario, fast_run, fast_traj):
    run = evolve_linear_heisenberg(fast_scenario, fast_run.pair)
    assert run.unitarity_defect() < 1e-8
    b_a = abs(run.b_from_a()[-1])
    assert abs(b_a - abs(fast_traj.beta_tilde()[-1])) < 1e-12
    assert np.max(np.abs(run.receiver_row_norms() - 1.0)) < 1e-9


def test_heisenberg_a_column_equals_state_vector(fast_scenario, fast_run,
                                                 fast_traj):
    run = evolve_linear_heisenberg(fast_scenario, fast_run.pair)
    col = run.coeffs[:, :, 0]
    assert np.max(np.abs(col[:, 0] - fast_traj.alpha)) < 1e-13
    assert np.max(np.abs(col[:, 1] - fast_traj.beta)) < 1e-13


def test_validator_self_convergence_order_two():
    """With pulses resampled per grid, the linear half-step interpolation
    dominates and the observed order is two."""
    def run(dt):
        sc = build_case("midpoint", 3, g_over_fsr=0.4, dt=dt, t_f_max=6.0)
        grid = sc.grid
        t = grid.times()
        ga = sc.sender_samples()
        gb = (2.5 * np.exp(-((t - 1.2) / 0.18) ** 2)).astype(complex)
        pair = PulsePair(gA=SampledSignal(grid, ga),
                         gB_tilde=SampledSignal(grid, gb),
                         t_f=grid.dt * int(round(3.0 / grid.dt)),
                         clamp_eps=1e-6, g_max=1e3)
        traj = evolve_single_excitation(sc, pair)
        stride = int(round(0.004 / dt))
        return np.abs(traj.beta[::stride])

    result = richardson_check(run, (0.004, 0.002, 0.001))
    assert result.order == pytest.approx(2.0, abs=0.3)
