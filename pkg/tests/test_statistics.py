import numpy as np
import pytest

from qmcspectra import models
from qmcspectra.chain_model import Block, QmcModel, segment, site_prob_series, truncate
from qmcspectra.polynomials import PolyFamily
from qmcspectra.spectral import (
    HomogeneousStieltjes,
    TruncatedStieltjes,
    find_symmetrizer,
    finite_spectrum_weights,
)
from qmcspectra.statistics import (
    classify_from_samples,
    classify_recurrence,
    first_passage_corner,
    first_passage_gf,
    first_passage_poly,
    jump_at_one,
    km_block,
    km_probability,
    positive_recurrent,
    reach_analysis,
    reach_probability,
)

from conftest import random_density

SQ2 = np.sqrt(2.0)


# -- spectral probabilities -------------------------------------------


def test_km_matches_power_oracle(rng):
    m = models.uniform_hopping_segment(5, 0.5, 0.4, 0.3, 0.2, 0.3)
    sym = find_symmetrizer(m, 4)
    assert sym.success
    w = finite_spectrum_weights(m)
    pf = PolyFamily(m)
    t = truncate(m, 0, 4).matrix
    d = m.block_dim
    for n in range(11):
        power = np.linalg.matrix_power(t, n)
        for (j, i) in [(0, 0), (2, 1), (4, 0), (1, 3)]:
            got = km_block(w, pf, sym, j, i, n)
            assert np.abs(got - power[j * d : (j + 1) * d, i * d : (i + 1) * d]).max() < 1e-9


def test_km_probability_values(rng):
    m = models.uniform_hopping_segment(5, 0.5, 0.4, 0.3, 0.2, 0.3)
    sym = find_symmetrizer(m, 4)
    w = finite_spectrum_weights(m)
    pf = PolyFamily(m)
    rho = random_density(rng)
    assert km_probability(w, pf, sym, 2, 2, rho, 0) == pytest.approx(1.0, abs=1e-10)
    series = site_prob_series(m, 1, 3, rho, 9)
    for n in (2, 5, 9):
        assert km_probability(w, pf, sym, 1, 3, rho, n) == pytest.approx(
            series[n], abs=1e-9
        )


def test_km_scalar_chain_matches_classical_formula():
    # scalar birth-death chain: the spectral sum against the eigensystem
    # of the symmetrized matrix is the classical result
    p_up, r_hold, q_down = 0.3, 0.2, 0.5
    blocks = {
        "A": Block(np.array([[p_up]], dtype=complex)),
        "B": Block(np.array([[r_hold]], dtype=complex)),
        "C": Block(np.array([[q_down]], dtype=complex)),
    }
    m = QmcModel(
        topology=segment(6), dim=None, block_dim=1, mode="abstract",
        blocks=blocks, substochastic=True, trace_vec=np.array([1.0]),
    )
    sym = find_symmetrizer(m, 5)
    w = finite_spectrum_weights(m)
    pf = PolyFamily(m)
    t = truncate(m, 0, 5).matrix
    for n in (3, 6):
        power = np.linalg.matrix_power(t, n)
        for (j, i) in [(0, 0), (3, 1)]:
            got = km_block(w, pf, sym, j, i, n)[0, 0].real
            assert got == pytest.approx(power[j, i].real, abs=1e-10)


def test_km_requires_symmetrizer():
    m = models.shear_coin_segment()
    sym = find_symmetrizer(m, 2)
    w = finite_spectrum_weights(m)
    with pytest.raises(ValueError, match="symmetrizer"):
        km_block(w, PolyFamily(m), sym, 1, 1, 2)


# -- first passage ----------------------------------------------------


def test_first_passage_zero_at_s_zero(density2):
    m = models.three_site_absorbing_oqw()
    assert np.abs(first_passage_gf(m, 1, 0, 0.0)).max() == 0.0


def test_three_site_first_passage_matrix():
    m = models.three_site_absorbing_oqw()
    s = 0.7
    target = (s / 4) * np.array(
        [[1, 0, 0, 0], [-1, -SQ2, 0, 0], [-1, 0, -SQ2, 0], [1, SQ2, SQ2, 2]]
    )
    assert np.abs(first_passage_gf(m, 1, 0, s) - target).max() < 1e-12
    assert np.abs(first_passage_poly(m, 1, 0, s) - target).max() < 1e-12
    assert np.abs(first_passage_corner(m, s) - target).max() < 1e-12


def test_coin_deformation_first_column():
    for g in (0.3, 1.0, 2.0):
        m = models.corner_coin_oqw(g)
        k = 2 + 2 * g * g
        s = 0.55
        col = s / (k - s) * np.array([2 * g * g, SQ2 * g, SQ2 * g, 1.0])
        f = first_passage_gf(m, 1, 0, s)
        assert np.abs(f[:, 0] - col).max() < 1e-12
        assert np.abs(first_passage_corner(m, s) - f).max() < 1e-12


@pytest.mark.parametrize("s", [0.3, 0.6, 0.9])
def test_first_passage_resolvent_identity(s):
    # Phi_jj(s) F_ji(s) = Phi_ji(s) - delta_ji I on truncations
    from qmcspectra.chain_model import resolvent_block

    m = models.flip_channel_half_line(0.7, 0.8, corner="up")
    d = m.block_dim
    for (j, i) in [(1, 0), (2, 2), (0, 3)]:
        f = first_passage_gf(m, j, i, s, window=48)
        phi_jj = resolvent_block(m, j, j, s, 48)
        phi_ji = resolvent_block(m, j, i, s, 48)
        delta = np.eye(d) if i == j else np.zeros((d, d))
        assert np.abs(phi_jj @ f - (phi_ji - delta)).max() < 1e-8


def test_polynomial_and_resolvent_paths_agree():
    m = models.flip_channel_half_line(0.6, 0.7)
    for (j, i, s) in [(2, 0, 0.5), (3, 1, 0.4), (1, 0, 0.8)]:
        a = first_passage_gf(m, j, i, s, window=64)
        b = first_passage_poly(m, j, i, s)
        assert np.abs(a - b).max() < 1e-8
    with pytest.raises(ValueError):
        first_passage_poly(m, 1, 1, 0.5)


def test_reach_probability_values():
    m = models.three_site_absorbing_oqw()
    for a, b in [(0.5, 0.2), (1.0, 0.0), (0.3, -0.35), (0.25, 0.31), (0.5, -0.5)]:
        rho = np.array([[a, b], [b, 1 - a]])
        assert reach_probability(m, 0, 1, rho) == pytest.approx(
            (1 + SQ2 * b) / 2, abs=1e-8
        )
    res = reach_analysis(m, 1, 1, np.eye(2) / 2)
    assert res.probability == 1.0


def test_reach_probability_certain_capture():
    for g in (0.3, 1.0, 2.0):
        m = models.corner_coin_oqw(g)
        for _ in range(2):
            rho = random_density(np.random.default_rng(int(10 * g)))
            assert reach_probability(m, 0, 1, rho) == pytest.approx(1.0, abs=1e-6)


def test_reach_probability_window_invariance(density2):
    m = models.flip_channel_half_line(0.7, 0.8, corner="up")
    rho = np.real(density2 + density2.T) / 2
    rho = rho / np.trace(rho)
    p64 = reach_probability(m, 0, 2, rho, window=64)
    p128 = reach_probability(m, 0, 2, rho, window=128)
    assert p64 == pytest.approx(p128, abs=1e-9)


# -- classification ---------------------------------------------------


def test_classifier_on_synthetic_ladders():
    ladder = [1 + 10.0**-m for m in range(2, 9)]
    diverging = [(z, 1.0 / np.sqrt(z - 1)) for z in ladder]
    assert classify_from_samples(diverging).verdict == "recurrent"
    big = [(z, min(1e9, 1.0 / (z - 1))) for z in ladder]
    assert classify_from_samples(big).verdict == "recurrent"
    finite = [(z, 5.0 - 2.0 * np.sqrt(z - 1)) for z in ladder]
    cls = classify_from_samples(finite)
    assert cls.verdict == "transient"
    assert cls.limit == pytest.approx(5.0, abs=1e-6)
    assert len(cls.evidence) == len(ladder)


def test_flip_channel_transient_every_density(rng):
    m = models.flip_channel_half_line(0.7, 0.8)
    ev = HomogeneousStieltjes.from_model(m)
    for rho in (np.diag([1.0, 0.0]), np.diag([0.0, 1.0]), np.eye(2) / 2):
        cls = classify_recurrence(m, 0, rho, ev)
        assert cls.verdict == "transient"
        assert cls.limit is not None and cls.limit < 10


def test_corner_restored_chain_recurrent_all_densities():
    # adding the up block at the corner makes the chain trace preserving;
    # the observable component is then a reflecting lazy walk, so every
    # density is recurrent (including diag(0, 1))
    from qmcspectra.spectral import CornerStieltjes

    m = models.flip_channel_half_line(0.7, 0.6, corner="up")
    inner = HomogeneousStieltjes.from_model(m)
    ev = CornerStieltjes(
        inner, m.overrides[0]["B"].matrix, a0=m.block(0, "A"), c=m.block(1, "C")
    )
    for rho in (np.diag([1.0, 0.0]), np.diag([0.0, 1.0]), np.eye(2) / 2):
        cls = classify_recurrence(m, 0, rho, ev)
        assert cls.verdict == "recurrent"


def test_recurrent_verdict_matches_unbounded_partial_sums():
    # the partial return series of the recurrent corner chain grows
    # without bound (like sqrt(N)); the classifier must say so
    from qmcspectra.spectral import CornerStieltjes

    m = models.flip_channel_half_line(0.7, 0.6, corner="up")
    rho = np.diag([0.25, 0.75])
    s1 = site_prob_series(m, 0, 0, rho, 500).sum()
    s2 = site_prob_series(m, 0, 0, rho, 2000).sum()
    s3 = site_prob_series(m, 0, 0, rho, 8000).sum()
    assert s2 > 1.8 * s1 and s3 > 1.8 * s2
    inner = HomogeneousStieltjes.from_model(m)
    ev = CornerStieltjes(
        inner, m.overrides[0]["B"].matrix, a0=m.block(0, "A"), c=m.block(1, "C")
    )
    assert classify_recurrence(m, 0, rho, ev).verdict == "recurrent"


def test_classifier_agrees_with_partial_sums():
    m = models.tilted_shear_half_line()
    ev = HomogeneousStieltjes.from_model(m)
    a = 0.35
    rho = np.array([[a, 0.0], [0.0, 1 - a]])
    cls = classify_recurrence(m, 0, rho, ev)
    assert cls.verdict == "transient"
    series = site_prob_series(m, 0, 0, np.array([a, 0.0, 1 - a]), 2000)
    partial = series.sum()
    assert cls.limit == pytest.approx((119 + 7 * a) / 102, abs=1e-8)
    # the return series decays fast here; the partial sum is already tight
    assert partial == pytest.approx(cls.limit, abs=1e-4)


def test_general_site_classification_truncated():
    m = models.flip_channel_half_line(0.7, 0.8)
    rho = np.diag([0.5, 0.5])
    cls = classify_recurrence(m, 2, rho, window=256)
    assert cls.verdict == "transient"
    # the series tail decays like 1/sqrt(N); quadrupling the horizon
    # halves it, so 2 S(4N) - S(N) removes the leading tail
    s1 = site_prob_series(m, 2, 2, np.diag([0.5, 0.5]), 1500).sum()
    s2 = site_prob_series(m, 2, 2, np.diag([0.5, 0.5]), 6000).sum()
    assert cls.limit == pytest.approx(2 * s2 - s1, abs=5e-3)


# -- point masses -----------------------------------------------------


def test_jump_at_one_absent_for_transient_chain():
    m = models.flip_channel_half_line(0.7, 0.8)
    ev = TruncatedStieltjes(m, window=400, tolerance=1.0, max_doublings=1)
    jump = jump_at_one(ev)
    assert np.linalg.norm(jump) == 0.0
    assert not positive_recurrent(ev, irreducible=True)


def test_jump_at_one_matches_discrete_node():
    # a trace-preserving segment has an eigenvalue at exactly 1; the
    # epsilon ladder must reproduce that node's weight
    up, down = models.flip_channel_blocks(0.7, 0.6)
    m = QmcModel(
        topology=segment(4),
        dim=2,
        block_dim=3,
        mode="compact",
        blocks={"A": up, "C": down},
        overrides={0: {"B": down}, 3: {"B": up}},
        substochastic=False,
    )
    assert max(m.tp_report().values()) < 1e-12
    w = finite_spectrum_weights(m)
    node1 = [p for p in w.points if abs(p.node - 1.0) < 1e-9]
    assert node1
    ev = TruncatedStieltjes(m)
    jump = jump_at_one(ev)
    assert np.abs(jump - node1[0].weight).max() < 1e-6
    assert positive_recurrent(ev, irreducible=True)


def test_divergent_transform_without_point_mass():
    # balanced line chain: the return transform diverges at 1 but carries
    # no atom there, so the walk is recurrent without positive recurrence
    m = models.uniform_hopping_line(0.5, 0.5, 0.5, 0.25, 0.25)
    from qmcspectra.folding import folded_transform_evaluator

    ev = folded_transform_evaluator(m, 0)
    jump = jump_at_one(ev)
    assert np.linalg.norm(jump) < 1e-6
    t = np.array([1.0, 0, 0, 1.0])
    big = ev.evaluate(1 + 1e-9).value
    assert (t @ big @ t.conj()).real > 1e3


def test_first_passage_mask_structure():
    # the masked operator keeps identity on the removed site's row and
    # carries the plain blocks elsewhere: its (0,1) block is -s C_1 and
    # its (2,1) block is -s A_1
    m = models.three_site_absorbing_oqw()
    s = 0.7
    t = truncate(m, 0, 2)
    masked = t.matrix.copy()
    masked[4:8, :] = 0.0
    M = np.eye(12, dtype=complex) - s * masked
    assert np.abs(M[0:4, 4:8] + s * m.block(1, "C")).max() == 0.0
    assert np.abs(M[8:12, 4:8] + s * m.block(1, "A")).max() == 0.0
    assert np.abs(M[4:8, 4:8] - np.eye(4)).max() == 0.0


def test_reach_analysis_exposes_generating_function():
    m = models.three_site_absorbing_oqw()
    res = reach_analysis(m, 0, 1, np.eye(2) / 2)
    s = 0.7
    assert np.abs(res.block(s) - first_passage_gf(m, 1, 0, s)).max() == 0.0
