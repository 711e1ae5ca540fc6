#!/usr/bin/env python3
"""
Tests for the coarse-grained exploration: scales, typicality, proper parts,
seeds, good sequences, the round record, omega^q and the branching processes.

Most tests run in d = 5 with rho = delta_16 (so R = 4) and only the duration
event enabled, which makes every band trajectory of moderate displacement
typical without any Monte Carlo verdicts.
"""

import math

import numpy as np
import pytest
from scipy import stats

from frilab.coarse_grain import (
    EXTINCT,
    NO_SEED,
    WINDOW_EXHAUSTED,
    AlgorithmState,
    CoarseContext,
    RoundRecord,
    Status,
    chain_hit_frequency,
    check_good_sequence,
    classify_typical,
    coarse_neighbors,
    coarse_order,
    derive_scales,
    expected_trimmed_offspring,
    failure_frequency,
    find_seed,
    hit_chain_samples,
    is_typical,
    largest_cluster_spans,
    omega_site_frequency,
    open_probability,
    proper_part,
    replay_record,
    restrict_typical,
    run_algorithm,
    sample_omega_q,
    simulate_branching,
    simulate_hit_chain,
    star_proper_part,
    typical_start,
    verify_replay,
)
from frilab.errors import BudgetExhaustedError, InvariantViolation
from frilab.fri import TrajectoryCloud
from frilab.lattice import PointSet, RngStream, Trajectory
from frilab.laws import EPSILON_4, Dirac
from frilab.models import AlgorithmParams, PotentialConfig, TypicalityParams

D = 5
O5 = (0,) * D
CFG = PotentialConfig(mc_walks=32, escape_cutoff_steps=256, green_table_radius=4)


def make_ctx(events=('E1',), seed=1, algorithm=None, **overrides):
    params = TypicalityParams(events=events, theta2=0.0, **overrides)
    return CoarseContext(Dirac(16), D, params, RngStream(seed), CFG, algorithm or AlgorithmParams())


def line(length, start=O5, axis=0):
    return Trajectory(start, [2 * axis] * length)


def shuttle(start, length=16):
    """Back and forth along the first axis: stays within one unit of its start."""
    return Trajectory(start, [0, 1] * (length // 2))


def test_scales_d5():
    scales = derive_scales(Dirac(16), 5)
    assert scales.R == 4
    assert scales.band == (4, 64)
    assert scales.z == (2,) * 5
    assert scales.T_block == 15
    assert scales.C_tilde == 16.0
    assert scales.gamma == 26.0
    assert scales.ruin_radius == 52
    assert math.isnan(scales.epsilon_d)
    with pytest.raises(ValueError):
        scales.capacity_scale(10)
    assert derive_scales(Dirac(16), 5, epsilon_d=0.5).capacity_scale(10) == 5.0


def test_scales_d4():
    scales = derive_scales(Dirac(100), 4)
    assert scales.R == 10
    assert scales.T_block == math.floor(100 / math.log(100))
    assert scales.return_cutoff == 0
    assert scales.capacity_scale(50) == pytest.approx(EPSILON_4 * 50 / math.log(100))


def test_scale_overrides_and_checks():
    scales = derive_scales(Dirac(16), 5, TypicalityParams(L_override=3, I_override=2))
    assert scales.L == 3.0
    assert scales.time_window == 8.0
    with pytest.raises(ValueError):
        derive_scales(Dirac(3), 5)
    with pytest.raises(ValueError):
        derive_scales(Dirac(16), 5, algorithm=AlgorithmParams(gamma=5.0))


def test_coarse_geometry():
    scales = derive_scales(Dirac(16), 5)
    assert coarse_neighbors(O5)[:2] == [(1, 0, 0, 0, 0), (-1, 0, 0, 0, 0)]
    assert len(coarse_neighbors(O5)) == 10
    assert sorted([(1, 0, 0, 0, 0), O5, (-1, 0, 0, 0, 0)], key=coarse_order)[0] == O5
    box = scales.coarse_box((1, 0, 0, 0, 0))
    assert box.contains((4, 0, 0, 0, 0)) and box.contains((7, 3, 3, 3, 3))
    assert not box.contains((8, 0, 0, 0, 0))
    inner = scales.inner_box(O5)
    assert inner.contains((2, 2, 2, 2, 2)) and inner.contains((3, 1, 3, 1, 3))


def test_duration_event():
    ctx = make_ctx()
    assert is_typical(line(16), ctx)
    short = classify_typical(line(3), ctx)
    assert not short.typical
    assert short.failed == ('E1',)
    far = classify_typical(line(20), ctx)
    assert far.failed == ('E1',)
    assert far.details['E1']['max_displacement'] == 20


def test_sausage_event_and_early_stop():
    ctx = make_ctx(events=('E1', 'E3'))
    verdict = classify_typical(line(3), ctx)
    assert verdict.failed == ('E1', 'E3')
    assert verdict.details['E3']['sausage_volume'] >= 5 ** 5
    assert classify_typical(line(3), ctx, stop_early=True).failed == ('E1',)


def test_capacity_event_needs_epsilon():
    ctx = make_ctx(events=('E2',))
    with pytest.raises(ValueError):
        classify_typical(line(16), ctx)


def test_restrict_typical():
    ctx = make_ctx()
    cloud = TrajectoryCloud.from_trajectories(D, [line(16), line(3), line(30)])
    kept = restrict_typical(cloud, ctx)
    assert kept.trajectories == [line(16)]


def test_context_memoizes_measures():
    ctx = make_ctx()
    traj = line(6)
    assert ctx.range_measure(traj) is ctx.range_measure(line(6))


def test_star_proper_part_without_threshold_is_the_range():
    ctx = make_ctx()
    traj = line(16)
    assert star_proper_part(traj, ctx) == traj.range_set()


def test_proper_part_removes_window_and_neighborhood():
    """Test that pp drops the time window around tau_A and the L-neighborhood of D."""
    ctx = make_ctx(L_override=2, I_override=16)
    traj = line(16)
    A = PointSet.from_points([(8, 0, 0, 0, 0)], D)
    Dset = PointSet.from_points([O5], D)
    part = proper_part(traj, A, Dset, ctx)
    expected = [i for i in range(17) if i not in (0, 1, 2, 7, 8, 9)]
    assert sorted(p[0] for p in part) == expected

    missed = proper_part(traj, PointSet.from_points([(0, 9, 0, 0, 0)], D), PointSet.empty(D), ctx)
    assert missed == traj.range_set()


def test_find_seed_picks_first_clique():
    """Test that the seed is the canonical first beta-subset of in-box typical trajectories."""
    ctx = make_ctx()
    cloud = TrajectoryCloud.from_trajectories(D, [
        shuttle((2, 2, 2, 2, 2)),
        shuttle((5, 0, 0, 0, 0)),
        shuttle((0, 1, 0, 0, 0)),
        shuttle(O5),
    ])
    seed = find_seed(cloud, O5, 2, ctx)
    assert seed is not None
    assert [t.start for t in seed.cloud] == [O5, (0, 1, 0, 0, 0)]
    assert len(seed.parts) == 2
    assert find_seed(cloud, O5, 4, ctx) is None
    with pytest.raises(ValueError):
        find_seed(cloud, O5, 0, ctx)


def test_good_sequence_violations():
    ctx = make_ctx(algorithm=AlgorithmParams(k1=1))
    parent = line(16)
    history = [TrajectoryCloud.from_trajectories(D, [parent])]

    assert check_good_sequence([], history, ctx).good
    with pytest.raises(ValueError):
        check_good_sequence([TrajectoryCloud.empty(D)], [], ctx)

    stray = TrajectoryCloud.from_trajectories(D, [Trajectory((0, 5, 0, 0, 0), [0])])
    verdict = check_good_sequence([stray], history, ctx, anchor_parts=[parent.range_set()])
    assert verdict.violation is None or verdict.violation['bullet'] != 2

    neighbor = line(16, start=(0, 2, 0, 0, 0))
    pair = [TrajectoryCloud.from_trajectories(D, [parent, neighbor])]
    bridge = TrajectoryCloud.from_trajectories(D, [Trajectory((0, 1, 0, 0, 0), [2, 3, 3])])
    verdict = check_good_sequence([bridge], pair, ctx, anchor_parts=[parent.range_set(), neighbor.range_set()])
    assert not verdict.good
    assert verdict.violation['bullet'] == 2
    assert verdict.violation['parents_hit'] == 2

    tip = PointSet.from_points([(16, 0, 0, 0, 0)], D)
    landing = TrajectoryCloud.from_trajectories(D, [Trajectory((0, 1, 0, 0, 0), [3])])
    verdict = check_good_sequence([landing], history, ctx, anchor_parts=[tip])
    assert verdict.violation['bullet'] == 2
    assert verdict.violation['landing'] == [0, 0, 0, 0, 0]

    crowd = TrajectoryCloud.from_trajectories(D, [Trajectory((0, 1, 0, 0, 0), [3]),
                                                  Trajectory((1, 1, 0, 0, 0), [3])])
    verdict = check_good_sequence([crowd], history, ctx, anchor_parts=[parent.range_set()])
    assert verdict.violation['bullet'] == 3
    assert verdict.violation['children'] == 2


def test_replay_record():
    """Test that a hand-written record replays to the expected status map."""
    record = [RoundRecord(0, (0, 0, 0, 0), 0), RoundRecord(1, (1, 0, 0, 0), 1), RoundRecord(2)]
    status = replay_record(record, 4, 1, 0)
    assert status[(0, 0, 0, 0)] == Status.SURVIVING
    assert status[(1, 0, 0, 0)] == Status.RUINED
    assert status[(-1, 0, 0, 0)] == Status.ACTIVE
    assert status[(1, 1, 0, 0)] == Status.UNEXPLORED
    assert replay_record([r.to_dict() for r in record], 4, 1, 0) == status
    assert failure_frequency([record]) == 0.5
    assert failure_frequency([]) == 0.0


def test_round_record_round_trip():
    r = RoundRecord(3, (1, 0, 0, 0), 1, [4, 2], False, 0, {'bullet': 2})
    assert RoundRecord.from_dict(r.to_dict()) == r
    assert RoundRecord(4).terminal


def test_illegal_status_change():
    state = AlgorithmState(4, 1, 0)
    state.set_status((0, 0, 0, 0), Status.RUINED)
    with pytest.raises(InvariantViolation):
        state.set_status((0, 0, 0, 0), Status.ACTIVE)
    with pytest.raises(ValueError):
        AlgorithmState(4, 0, 0)


def test_algorithm_without_intensity_has_no_seed():
    typicality = TypicalityParams(events=('E1',), theta2=0.0)
    state = run_algorithm(0.0, Dirac(16), D, 1, RngStream(2), typicality=typicality, cfg=CFG)
    assert state.outcome == NO_SEED
    assert len(state.record) == 1 and state.record[0].terminal
    assert state.survival_set() == []
    assert verify_replay(state)
    assert state.summary()['rounds'] == 0


@pytest.mark.slow
def test_algorithm_is_reproducible():
    typicality = TypicalityParams(events=('E1',), theta2=0.0)
    params = AlgorithmParams(u=5.0, alpha=1, beta=1)
    runs = [run_algorithm(5.0, Dirac(16), D, 1, RngStream(3), params, typicality, CFG) for _ in range(2)]
    assert [r.to_dict() for r in runs[0].record] == [r.to_dict() for r in runs[1].record]
    assert runs[0].status == runs[1].status
    assert runs[0].outcome in (NO_SEED, EXTINCT, WINDOW_EXHAUSTED)
    assert verify_replay(runs[0])


def test_omega_site_frequency_matches_closed_form():
    p = open_probability(0.0001, 1.0, 4)
    assert p == pytest.approx(0.9999 ** 625)
    freq, stderr = omega_site_frequency(0.0001, 1.0, 4, 20000, RngStream(4))
    assert abs(freq - p) < 5 * stderr + 1e-9
    assert open_probability(0.0, 3.0, 6) == 1.0


def test_omega_extremes():
    open_all = sample_omega_q(0.0, 1.0, 4, 3, RngStream(6))
    assert open_all.density == 1.0
    assert len(open_all.origin_cluster) == 7 ** 4
    assert largest_cluster_spans(open_all)
    assert open_all.is_open((3, -3, 0, 1))

    closed = sample_omega_q(1.0, 1.0, 4, 3, RngStream(7))
    assert closed.density == 0.0
    assert len(closed.origin_cluster) == 0
    assert not largest_cluster_spans(closed)


def test_omega_largest_cluster_spans_at_small_q():
    """Test that with few marks the largest open cluster spans the window in nearly every replica."""
    q, gamma = 0.0005, 0.5
    assert open_probability(q, gamma, 4) > 0.95
    spans = [largest_cluster_spans(sample_omega_q(q, gamma, 4, 6, RngStream(30).child('replica', r)))
             for r in range(40)]
    assert sum(spans) >= 0.95 * len(spans)


def test_omega_argument_checks():
    with pytest.raises(ValueError):
        open_probability(0.1, 0.0, 4)
    with pytest.raises(ValueError):
        sample_omega_q(1.5, 1.0, 4, 2, RngStream(8))
    with pytest.raises(ValueError):
        omega_site_frequency(0.1, 1.0, 4, 0, RngStream(8))


def test_typical_start_passes_through_x():
    ctx = make_ctx()
    x = (3, 0, 0, 0, 0)
    cloud = typical_start(x, ctx, RngStream(9), size=2)
    assert len(cloud) == 2
    for traj in cloud:
        assert x in traj.range_set()
        assert traj.length == 16


def test_typical_start_budget():
    ctx = make_ctx(M=0.1, K=4.0)
    with pytest.raises(BudgetExhaustedError):
        typical_start(O5, ctx, RngStream(10), budget=5)


def test_branching_without_intensity_dies_out():
    ctx = make_ctx()
    seed = TrajectoryCloud.from_trajectories(D, [line(16)])
    result = simulate_branching(seed, 0.0, 3, ctx, RngStream(11))
    assert result.extinct
    assert result.generations == 1
    assert result.sizes()[0] == {'generation': 0, 'Y': 1, 'Ybar': 1}
    assert expected_trimmed_offspring(line(16), 0.0, 0.1, ctx) == 0.0


def test_branching_argument_checks():
    ctx = make_ctx()
    with pytest.raises(ValueError):
        simulate_branching(TrajectoryCloud.from_trajectories(D, [line(3)]), 1.0, 1, ctx, RngStream(12))
    with pytest.raises(ValueError):
        simulate_branching(TrajectoryCloud.empty(D), 1.0, -1, ctx, RngStream(12))


@pytest.mark.slow
def test_trimmed_branching_is_contained():
    ctx = make_ctx()
    seed = typical_start(O5, ctx, RngStream(13))
    result = simulate_branching(seed, 0.3, 2, ctx, RngStream(14), epsilon=0.2)
    for y, ybar in zip(result.Y, result.Ybar):
        assert ybar.issubmultiset(y)


@pytest.mark.slow
def test_offspring_mean_dominates_trimmed_intensity():
    """Test that a typical parent has at least u (1 - eps/2) e(eta-hat) children on average."""
    ctx = make_ctx()
    parent = line(16)
    u, epsilon = 0.5, 0.2
    bound = expected_trimmed_offspring(parent, u, epsilon, ctx)
    assert bound > 0
    seed = TrajectoryCloud.from_trajectories(D, [parent])
    runs = [simulate_branching(seed, u, 1, ctx, RngStream(18).child('replica', r), epsilon=epsilon)
            for r in range(200)]
    children = np.array([len(run.Y[1]) for run in runs])
    trimmed = np.array([len(run.Ybar[1]) for run in runs])
    assert children.mean() + 3 * children.std(ddof=1) / math.sqrt(len(runs)) >= bound
    assert np.all(trimmed <= children)


@pytest.mark.parametrize("variant", ['square', 'diamond', 'direct'])
def test_chain_shapes(variant):
    ctx = make_ctx()
    traj = line(16)
    chains = hit_chain_samples(traj, 3, variant, 4, ctx, RngStream(15).child(variant))
    assert chains.shape == (4, 3, D)
    for chain in chains:
        assert tuple(chain[0]) in traj.range_set()
    assert 0.0 <= chain_hit_frequency(chains, ctx) <= 1.0


def test_first_chain_point_follows_normalized_equilibrium():
    """Test that K_0 frequencies match e^0 of the starting trajectory."""
    ctx = make_ctx()
    traj = line(16)
    n = 2000
    chains = hit_chain_samples(traj, 1, 'diamond', n, ctx, RngStream(19))
    measure = ctx.range_measure(traj)
    weights = measure.normalized()
    index = measure.support.locate(chains[:, 0, :])
    assert np.all(index >= 0)
    counts = np.bincount(index, minlength=len(weights))
    assert np.all(counts[weights == 0] == 0)
    seen = weights > 0
    _, p_value = stats.chisquare(counts[seen], f_exp=n * weights[seen] / weights[seen].sum())
    assert p_value > 1e-3


@pytest.mark.slow
def test_square_chain_matches_direct_construction():
    """Test that the square chain and the X_{S_i} construction give the same law of K_1."""
    ctx = make_ctx()
    traj = line(16)
    square = hit_chain_samples(traj, 2, 'square', 1000, ctx, RngStream(20).child('square'))
    direct = hit_chain_samples(traj, 2, 'direct', 1000, ctx, RngStream(20).child('direct'))
    assert stats.ks_2samp(square[:, 1, 0], direct[:, 1, 0]).pvalue > 1e-3


@pytest.mark.slow
def test_chain_hit_frequency_decreases_with_length():
    """Test that K_{alpha - 1} lands in the inner box less often at alpha = 3 than at alpha = 2."""
    ctx = make_ctx()
    start = shuttle((6, 2, 2, 2, 2))
    assert all(ctx.scales.inner_box((1, 0, 0, 0, 0)).contains(p) for p in start.range_set())
    chains = hit_chain_samples(start, 3, 'full', 300, ctx, RngStream(21))
    two = chain_hit_frequency(chains[:, :2], ctx)
    three = chain_hit_frequency(chains, ctx)
    assert two > 0
    assert three < two


def test_full_chain_steps_land_on_previous_ranges():
    ctx = make_ctx()
    chain = simulate_hit_chain(line(16), 2, 'full', ctx, RngStream(16))
    assert chain.shape == (2, D)
    assert tuple(chain[0]) in line(16).range_set()


def test_chain_argument_checks():
    ctx = make_ctx()
    with pytest.raises(ValueError):
        simulate_hit_chain(line(16), 2, 'zigzag', ctx, RngStream(17))
    with pytest.raises(ValueError):
        simulate_hit_chain(line(16), 0, 'square', ctx, RngStream(17))
    with pytest.raises(ValueError):
        simulate_hit_chain(line(3), 2, 'full', ctx, RngStream(17))
