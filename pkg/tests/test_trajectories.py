import numpy as np
import pytest

from qmcspectra import models, site_prob
from qmcspectra.chain_model import (
    Block,
    LatticeState,
    QmcModel,
    block_from_matrix,
    evolve,
    segment,
    total_trace,
)
from qmcspectra.quantum_core import min_eigenvalue, superop_of
from qmcspectra.trajectories import (
    TrajectoryConfig,
    estimate_site_prob,
    sample_trajectory,
)


def ping_pong_model():
    eye = np.eye(2)
    return QmcModel(
        topology=segment(2),
        dim=2,
        block_dim=4,
        mode="full",
        blocks={},
        overrides={
            0: {"A": Block(superop_of([eye]), (eye,))},
            1: {"C": Block(superop_of([eye]), (eye,))},
        },
        substochastic=False,
    )


def test_deterministic_model_gives_deterministic_path():
    m = ping_pong_model()
    cfg = TrajectoryConfig(m, 0, np.eye(2) / 2, steps=5, n_traj=1, seed=3)
    path = sample_trajectory(cfg)
    assert [s for s, _ in path] == [0, 1, 0, 1, 0, 1]


def test_config_validation():
    m = models.flip_channel_half_line(0.7, 0.8)
    with pytest.raises(ValueError, match="full-mode"):
        TrajectoryConfig(m, 0, np.eye(2) / 2, 3, 10)
    m2 = models.shear_coin_segment()
    with pytest.raises(ValueError):
        TrajectoryConfig(m2, 9, np.eye(2) / 2, 3, 10)
    with pytest.raises(ValueError):
        TrajectoryConfig(m2, 0, np.eye(3) / 3, 3, 10)


def test_superoperator_only_blocks_rejected():
    mat = superop_of([np.eye(2) / np.sqrt(2)])
    m = QmcModel(
        topology=segment(2),
        dim=2,
        block_dim=4,
        mode="full",
        blocks={},
        overrides={0: {"A": block_from_matrix(mat)}, 1: {"C": block_from_matrix(mat)}},
        substochastic=True,
    )
    cfg = TrajectoryConfig(m, 0, np.eye(2) / 2, steps=2, n_traj=4)
    with pytest.raises(ValueError, match="Kraus"):
        sample_trajectory(cfg)


def test_conditioned_states_stay_unit_trace_psd():
    m = models.uniform_hopping_half_line(0.5, 0.3, 0.4, 0.25, 0.25)
    rho = np.array([[0.6, 0.2], [0.2, 0.4]])
    cfg = TrajectoryConfig(m, 1, rho, steps=12, n_traj=1, seed=9)
    for t in range(4):
        for site, state in sample_trajectory(cfg, t):
            if site is None:
                continue
            assert np.trace(state).real == pytest.approx(1.0, abs=1e-10)
            assert min_eigenvalue(state) > -1e-10


def test_same_seed_bit_identical():
    m = models.shear_coin_segment()
    rho = np.array([[0.3, 0.1], [0.1, 0.7]])
    cfg = TrajectoryConfig(m, 2, rho, steps=4, n_traj=3000, seed=11)
    a = estimate_site_prob(cfg)
    b = estimate_site_prob(cfg)
    assert np.array_equal(a.means, b.means)
    assert np.array_equal(a.stderrs, b.stderrs)
    c = estimate_site_prob(TrajectoryConfig(m, 2, rho, 4, 3000, seed=12))
    assert not np.array_equal(a.means, c.means)


def test_worker_count_does_not_change_results(monkeypatch):
    m = models.shear_coin_segment()
    rho = np.array([[0.3, 0.1], [0.1, 0.7]])
    cfg = TrajectoryConfig(m, 2, rho, steps=3, n_traj=25_000, seed=4)
    base = estimate_site_prob(cfg)
    monkeypatch.setenv("QMC_SPECTRA_THREADS", "3")
    threaded = estimate_site_prob(cfg)
    assert np.array_equal(base.means, threaded.means)


def test_estimate_step_zero_is_delta():
    m = models.shear_coin_segment()
    cfg = TrajectoryConfig(m, 1, np.eye(2) / 2, steps=2, n_traj=500, seed=0)
    est = estimate_site_prob(cfg)
    assert est.mean(0, 1) == 1.0
    assert est.mean(0, 0) == 0.0


def test_one_step_split_matches_exact_probabilities():
    m = models.diagonal_coin_line_walk()
    rho = np.array([[0.7, 0.1], [0.1, 0.3]])
    cfg = TrajectoryConfig(m, 0, rho, steps=1, n_traj=100_000, seed=21)
    est = estimate_site_prob(cfg)
    for target in (-1, 1):
        exact = site_prob(m, 0, target, rho, 1)
        se = max(est.stderr(1, target), 1e-4)
        assert abs(est.mean(1, target) - exact) < 3 * se


def test_multi_effect_blocks_estimate():
    m = models.uniform_hopping_half_line(0.5, 0.3, 0.4, 0.25, 0.25)
    rho = np.array([[0.6, 0.2], [0.2, 0.4]])
    cfg = TrajectoryConfig(m, 2, rho, steps=6, n_traj=60_000, seed=5)
    est = estimate_site_prob(cfg)
    for site in (0, 2, 4):
        exact = site_prob(m, 2, site, rho, 6)
        se = max(est.stderr(6, site), 1e-4)
        assert abs(est.mean(6, site) - exact) < 4 * se


def test_kill_events_match_absorbed_mass():
    m = models.three_site_absorbing_oqw()
    rho = np.eye(2) / 2
    cfg = TrajectoryConfig(m, 1, rho, steps=2, n_traj=50_000, seed=5)
    est = estimate_site_prob(cfg)
    alive = est.means[2].sum()
    exact = total_trace(m, evolve(m, LatticeState.from_density(m, 1, rho), 2))
    se = np.sqrt(exact * (1 - exact) / cfg.n_traj)
    assert abs(alive - exact) < 3 * se


def test_estimate_invariants():
    m = models.shear_coin_segment()
    cfg = TrajectoryConfig(m, 2, np.eye(2) / 2, steps=5, n_traj=2_000, seed=7)
    est = estimate_site_prob(cfg)
    assert est.means.min() >= 0.0 and est.means.max() <= 1.0
    for step in range(6):
        row_sum = est.means[step].sum()
        sigma = np.sqrt((est.stderrs[step] ** 2).sum())
        assert row_sum <= 1.0 + 3 * sigma + 1e-12
    assert est.mean(2, 99) == 0.0 and est.stderr(2, 99) == 0.0
    assert list(est.sites()) == [0, 1, 2]


def test_flip_channel_full_mode_occupation():
    # the full-mode flip chain is a genuine OQW; ten-step occupations must
    # match direct evolution, and the compact representation of the same
    # chain gives identical probabilities
    m = models.flip_channel_half_line(0.7, 0.8, mode="full")
    mc = models.flip_channel_half_line(0.7, 0.8)
    rho = np.array([[0.55, 0.15], [0.15, 0.45]])
    cfg = TrajectoryConfig(m, 0, rho, steps=10, n_traj=50_000, seed=13)
    est = estimate_site_prob(cfg)
    for site in (0, 2, 4):
        exact = site_prob(m, 0, site, rho, 10)
        assert exact == pytest.approx(site_prob(mc, 0, site, rho, 10), abs=1e-12)
        se = max(est.stderr(10, site), 1e-4)
        assert abs(est.mean(10, site) - exact) < 3 * se
