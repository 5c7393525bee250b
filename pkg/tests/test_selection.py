import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, settings
from hypothesis import strategies as st

from rbfdeform import (
    BoundarySet,
    KernelEvalCounter,
    SelectionConfig,
    error_stage_cost,
    gcb_select,
    greedy_select,
    group_arg_max_error,
    interpolation_error,
    partition_boundary,
    random_select,
    seed_supports,
)
from rbfdeform.core import SupportSet, solve_support_weights
from rbfdeform.errors import (
    EmptyGroupError,
    InvalidCountError,
    InvalidGroupCountError,
    SelectionStalledError,
    TooFewBoundaryNodesError,
    UnknownIndexError,
)
from conftest import make_boundary


def smooth_random_boundary(rng, n):
    """Random points with a smooth (low-order trigonometric) displacement."""
    points = rng.uniform(-1.0, 1.0, size=(n, 3))
    coef = rng.normal(scale=0.1, size=(3, 3))
    disp = np.stack(
        [np.sin(points @ coef[i]) * 0.2 for i in range(3)], axis=1
    )
    return make_boundary(points, disp)


class TestPartition:
    def test_balance_10_into_3(self, hemisphere):
        b = make_boundary(np.random.default_rng(0).normal(size=(10, 3)))
        part = partition_boundary(b, 3, seed=42)
        assert sorted(len(g) for g in part.groups) == [3, 3, 4]

    def test_single_group_is_everything(self, hemisphere):
        part = partition_boundary(hemisphere, 1, seed=0)
        assert len(part.groups) == 1
        assert np.array_equal(np.sort(part.groups[0]), hemisphere.indices)

    def test_singleton_groups(self, hemisphere):
        part = partition_boundary(hemisphere, len(hemisphere), seed=0)
        assert all(len(g) == 1 for g in part.groups)

    def test_determinism(self, hemisphere):
        a = partition_boundary(hemisphere, 7, seed=99)
        b = partition_boundary(hemisphere, 7, seed=99)
        for ga, gb in zip(a.groups, b.groups):
            assert np.array_equal(ga, gb)

    def test_invalid_group_count(self, hemisphere):
        with pytest.raises(InvalidGroupCountError):
            partition_boundary(hemisphere, 0, seed=0)
        with pytest.raises(InvalidGroupCountError):
            partition_boundary(hemisphere, len(hemisphere) + 1, seed=0)

    @settings(max_examples=40, deadline=None)
    @given(
        n=st.integers(min_value=1, max_value=60),
        m=st.integers(min_value=1, max_value=60),
        seed=st.integers(min_value=0, max_value=2**32 - 1),
    )
    def test_partition_invariants(self, n, m, seed):
        if m > n:
            return
        b = make_boundary(np.random.default_rng(0).normal(size=(n, 3)))
        part = partition_boundary(b, m, seed)
        merged = np.concatenate(part.groups)
        assert len(merged) == n
        assert np.array_equal(np.sort(merged), b.indices)
        sizes = [len(g) for g in part.groups]
        assert max(sizes) - min(sizes) <= 1


class TestSeedSupports:
    def test_three_nodes_total(self):
        b = make_boundary(
            [[0, 0, 0], [1, 0, 0], [0, 1, 0]],
            [[0, 0, 1], [0, 0, 0], [0, 0, 0]],
        )
        seeds = seed_supports(b)
        assert seeds[0] == 0  # max displacement magnitude
        assert sorted(seeds.tolist()) == [0, 1, 2]

    def test_zero_displacements_farthest_point_from_lowest_index(self):
        pts = [[0, 0, 0], [1, 0, 0], [5, 0, 0], [2.6, 0, 0]]
        b = make_boundary(pts)
        seeds = seed_supports(b)
        # start at 0 by the tie rule, then 2 (farthest), then 3
        # (maximizes min distance to {0, 2}: min(2.6, 2.4) beats node 1's 1.0)
        assert seeds.tolist() == [0, 2, 3]

    def test_dominant_displacement_first(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(5, 3))
        disp = np.zeros((5, 3))
        disp[3] = [0.0, 0.0, 9.0]
        b = make_boundary(pts, disp)
        assert seed_supports(b)[0] == 3

    def test_too_few_nodes(self):
        b = make_boundary([[0, 0, 0], [1, 0, 0]])
        with pytest.raises(TooFewBoundaryNodesError):
            seed_supports(b)


class TestInterpolationError:
    def test_residual_norm_is_euclidean(self):
        b = make_boundary(
            [[0, 0, 0], [10, 0, 0], [0, 10, 0]],
            [[3, 4, 0], [0, 0, 0], [0, 0, 0]],
        )
        support = SupportSet(
            nodes=np.array([1]), points=np.array([[10.0, 0, 0]]), weights=np.zeros((1, 3))
        )
        # zero weights make the interpolant zero, so the residual at node 0
        # is the prescribed (3, 4, 0): norm 5
        assert interpolation_error(0, b, support, 1.0) == pytest.approx(5.0)

    def test_exact_prescription_gives_zero(self, rng):
        pts = rng.normal(size=(6, 3))
        disp = rng.normal(size=(6, 3))
        w = solve_support_weights(pts, disp, 4.0)
        b = make_boundary(pts, disp)
        support = SupportSet(nodes=np.arange(6), points=pts, weights=w)
        for j in range(6):
            assert interpolation_error(j, b, support, 4.0) <= 1e-8

    def test_unknown_index(self, hemisphere):
        support = SupportSet(
            nodes=np.array([0]),
            points=hemisphere.points[:1],
            weights=np.zeros((1, 3)),
        )
        with pytest.raises(UnknownIndexError):
            interpolation_error(10_000, hemisphere, support, 1.0)


class TestGroupArgMax:
    def zero_support(self, b):
        return SupportSet(
            nodes=np.array([0]), points=b.points[:1], weights=np.zeros((1, 3))
        )

    def test_singleton_group(self, rng):
        b = make_boundary(rng.normal(size=(5, 3)), rng.normal(size=(5, 3)))
        s = self.zero_support(b)
        node, err = group_arg_max_error(np.array([2]), b, s, 3.0)
        assert node == 2
        assert err == pytest.approx(np.linalg.norm(b.disp[2]))

    def test_all_zero_ties_break_low(self, rng):
        b = make_boundary(rng.normal(size=(6, 3)))  # zero displacements
        s = self.zero_support(b)
        node, err = group_arg_max_error(np.array([4, 1, 3]), b, s, 3.0)
        assert node == 1
        assert err == 0.0

    def test_matches_brute_force(self, rng):
        b = make_boundary(rng.normal(size=(12, 3)), rng.normal(size=(12, 3)))
        s = self.zero_support(b)
        group = np.array([7, 2, 9, 5])
        node, err = group_arg_max_error(group, b, s, 3.0)
        best = max(group, key=lambda j: interpolation_error(j, b, s, 3.0))
        assert node == best
        assert err == pytest.approx(interpolation_error(best, b, s, 3.0))

    def test_counter_increment(self, rng):
        b = make_boundary(rng.normal(size=(9, 3)), rng.normal(size=(9, 3)))
        pts = b.points[:3]
        s = SupportSet(nodes=np.arange(3), points=pts, weights=np.zeros((3, 3)))
        counter = KernelEvalCounter()
        group_arg_max_error(np.arange(7), b, s, 3.0, counter=counter)
        assert counter.count == 7 * 3

    def test_empty_group(self, hemisphere):
        s = self.zero_support(hemisphere)
        with pytest.raises(EmptyGroupError):
            group_arg_max_error(np.array([], dtype=int), hemisphere, s, 1.0)


class TestGcbSelect:
    def test_huge_tolerance_returns_seeds(self, hemisphere):
        config = SelectionConfig(radius=5.0, tol=1e9, max_supports=200, m=4)
        result = gcb_select(hemisphere, config)
        assert len(result.support) == 3
        assert result.converged
        assert np.array_equal(result.support.nodes, seed_supports(hemisphere))

    def test_zero_field_returns_seeds(self, rng):
        b = make_boundary(rng.normal(size=(30, 3)))
        config = SelectionConfig(radius=5.0, tol=1e-6, max_supports=30, m=3)
        result = gcb_select(b, config)
        assert len(result.support) == 3
        assert result.converged
        assert (result.support.weights == 0.0).all()

    def test_m_one_equals_greedy(self, rng):
        for seed in range(3):
            b = smooth_random_boundary(np.random.default_rng(seed), 80)
            config = SelectionConfig(
                radius=4.0, tol=1e-5, max_supports=50, m=1, seed=seed
            )
            a = gcb_select(b, config)
            g = greedy_select(b, replace(config, m=17))  # m is forced to 1
            assert np.array_equal(a.support.nodes, g.support.nodes)

    def test_convergence_soundness_hemisphere(self, hemisphere):
        config = SelectionConfig(radius=20.0, tol=1e-6, max_supports=200, m=5)
        result = gcb_select(hemisphere, config)
        assert result.converged
        assert len(result.support) < 200 / 4  # far fewer supports than nodes
        worst = max(
            interpolation_error(int(j), hemisphere, result.support, 20.0)
            for j in hemisphere.indices
        )
        assert worst <= 1e-6

    def test_monotone_growth_and_unique_nodes(self, hemisphere):
        config = SelectionConfig(radius=5.0, tol=1e-6, max_supports=60, m=3)
        result = gcb_select(hemisphere, config)
        nodes = result.support.nodes
        assert len(np.unique(nodes)) == len(nodes)
        adds = [r for r in result.history.records if r.local_max_error > config.tol]
        assert len(nodes) <= 3 + len(adds)

    def test_determinism_bitwise(self, hemisphere):
        config = SelectionConfig(radius=5.0, tol=1e-6, max_supports=100, m=4, seed=5)
        a = gcb_select(hemisphere, config)
        b = gcb_select(hemisphere, config)
        assert np.array_equal(a.support.nodes, b.support.nodes)
        assert np.array_equal(a.support.weights, b.support.weights)
        for ra, rb in zip(a.history.records, b.history.records):
            assert ra.node == rb.node
            assert ra.local_max_error == rb.local_max_error
            assert ra.kernel_evals == rb.kernel_evals

    def test_worker_count_invariance(self, hemisphere):
        config = SelectionConfig(radius=5.0, tol=1e-6, max_supports=100, m=4, seed=5)
        a = gcb_select(hemisphere, config)
        b = gcb_select(hemisphere, replace(config, workers=4))
        assert np.array_equal(a.support.nodes, b.support.nodes)
        assert np.array_equal(a.support.weights, b.support.weights)

    def test_max_supports_cap(self, hemisphere):
        config = SelectionConfig(radius=5.0, tol=1e-12, max_supports=10, m=2)
        result = gcb_select(hemisphere, config)
        assert len(result.support) == 10

    def test_stalls_on_contradictory_duplicates(self):
        # two coincident nodes with different prescribed displacements can
        # never both be satisfied; the second is rejected as near-singular
        pts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 0]], dtype=float)
        disp = np.zeros((4, 3))
        disp[0] = [1.0, 0, 0]
        disp[3] = [-1.0, 0, 0]
        b = make_boundary(pts, disp)
        config = SelectionConfig(radius=3.0, tol=1e-9, max_supports=4, m=1)
        with pytest.raises(SelectionStalledError):
            gcb_select(b, config)

    def test_m_larger_than_boundary_rejected(self, hemisphere):
        config = SelectionConfig(radius=5.0, tol=1e-6, max_supports=10, m=20000)
        with pytest.raises(InvalidGroupCountError):
            gcb_select(hemisphere, config)

    def test_history_counters(self, hemisphere):
        m = 4
        config = SelectionConfig(radius=5.0, tol=1e-6, max_supports=40, m=m, seed=2)
        result = gcb_select(hemisphere, config)
        part = partition_boundary(hemisphere, m, seed=2)
        n_supports = 3
        cum = 0
        for r in result.history.records:
            assert r.group == r.iteration % m
            assert r.kernel_evals == len(part.groups[r.group]) * n_supports
            cum += r.kernel_evals
            assert r.cum_kernel_evals == cum
            if r.local_max_error > config.tol:
                n_supports += 1
        sweep = result.history.final_sweep
        assert sweep is not None
        assert sweep.kernel_evals == len(hemisphere) * len(result.support)
        assert sweep.cum_kernel_evals == cum + sweep.kernel_evals
        assert error_stage_cost(result.history) == cum


class TestRandomSelect:
    def test_full_count_takes_everything(self, hemisphere):
        s = random_select(hemisphere, len(hemisphere), seed=0, radius=5.0)
        assert np.array_equal(np.sort(s.nodes), hemisphere.indices)

    def test_same_seed_same_set(self, hemisphere):
        a = random_select(hemisphere, 10, seed=3, radius=5.0)
        b = random_select(hemisphere, 10, seed=3, radius=5.0)
        assert np.array_equal(a.nodes, b.nodes)

    def test_golden_triple(self):
        b = make_boundary(np.random.default_rng(0).normal(size=(10, 3)))
        s = random_select(b, 3, seed=2024, radius=5.0)
        # frozen once from numpy default_rng(2024).choice(10, 3, replace=False)
        assert s.nodes.tolist() == [6, 0, 1]

    def test_weights_interpolate(self, hemisphere):
        s = random_select(hemisphere, 25, seed=1, radius=5.0)
        for j in s.nodes[:5]:
            assert interpolation_error(int(j), hemisphere, s, 5.0) <= 1e-8

    def test_invalid_count(self, hemisphere):
        with pytest.raises(InvalidCountError):
            random_select(hemisphere, 2, seed=0, radius=5.0)
        with pytest.raises(InvalidCountError):
            random_select(hemisphere, len(hemisphere) + 1, seed=0, radius=5.0)


class TestErrorStageCost:
    def test_empty_history(self):
        from rbfdeform import SelectionHistory

        assert error_stage_cost(SelectionHistory()) == 0

    def test_single_iteration_card_times_supports(self):
        from rbfdeform import IterationRecord, SelectionHistory

        h = SelectionHistory(
            records=[
                IterationRecord(
                    iteration=3,
                    group=0,
                    node=5,
                    local_max_error=1.0,
                    kernel_evals=21,
                    cum_kernel_evals=21,
                    t1_s=0.0,
                    t2_s=0.0,
                )
            ]
        )
        assert error_stage_cost(h) == 21

    def test_cost_scales_inversely_with_m(self, hemisphere):
        # fixed iteration count and schedule: run both to the same cap with
        # a tolerance nothing meets, so every visit adds a node
        cap = 60
        base = SelectionConfig(radius=5.0, tol=1e-15, max_supports=cap, m=1, seed=0)
        count_1 = error_stage_cost(gcb_select(hemisphere, base).history)
        for m in (2, 5, 10):
            count_m = error_stage_cost(
                gcb_select(hemisphere, replace(base, m=m)).history
            )
            assert count_m * m / count_1 == pytest.approx(1.0, rel=0.1)
