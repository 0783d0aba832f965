import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boafi.bayesnet import BayesianNetwork, DecisionTree, Internal, Leaf, dump_model, learn_network, leaf_probability
from boafi.core import ContractError, Provenance, derive_stream
from boafi.engine import BoaConfig, generation_step
from boafi.core import random_population
from boafi.fitmodel import (
    FitnessStatsPool,
    NotReadyError,
    UmdaFitnessModel,
    estimate_fitness,
    estimate_many,
    leaf_condition_mean,
    leaf_fitness_mean,
    record_actual,
    record_many,
    reset,
    umda_estimate,
)
from boafi.problems import onemax

import oracles

WORKED_POOL = [((0, 0), 2.0), ((0, 1), 0.0), ((1, 0), 0.0), ((1, 1), 3.0)]
ONEMAX_POOL = [((0, 0), 0.0), ((0, 1), 1.0), ((1, 0), 1.0), ((1, 1), 2.0)]


def worked_net():
    return BayesianNetwork([DecisionTree(0, Leaf()), DecisionTree(1, Internal(0, Leaf(), Leaf()))])


def fed(net, records):
    pool = FitnessStatsPool()
    for bits, f in records:
        record_actual(net, pool, np.array(bits), f)
    return pool


def random_fixture(rng, n=None, rows=None):
    n = n or int(rng.integers(1, 9))
    rows = rows or int(rng.integers(1, 201))
    X = oracles.planted_data(rng, rows, n)
    net = learn_network(X)
    f = rng.normal(size=rows) + X.sum(axis=1)
    pool = FitnessStatsPool()
    record_many(net, pool, X, f)
    records = list(zip(X.tolist(), f.tolist()))
    return net, pool, records


class TestRecord:
    def test_single_record(self):
        net = BayesianNetwork.empty(4)
        pool = fed(net, [((1, 0, 1, 1), 3.0)])
        assert pool.mean == 3.0
        for tree in net.trees:
            x = (1, 0, 1, 1)[tree.target]
            assert tree.root.fit_count(x) == 1
            assert tree.root.fit_sum(x) == 3.0
            assert tree.root.fit_count(1 - x) == 0

    def test_global_count_per_solution(self):
        pool = fed(BayesianNetwork.empty(7), [((0,) * 7, 1.0), ((1,) * 7, 2.0)])
        assert pool.global_count == 2

    def test_worked_example_leaf_averages(self):
        net = worked_net()
        fed(net, WORKED_POOL)
        for tree in net.trees:
            for leaf, cond in tree.leaf_paths():
                for x in (0, 1):
                    expected = oracles.mean_fitness(WORKED_POOL, {**cond, tree.target: x})
                    assert leaf_fitness_mean(leaf, x, None) == expected
        inner = net.trees[1].root.child1
        assert (leaf_fitness_mean(inner, 0, None), leaf_fitness_mean(inner, 1, None)) == (0.0, 3.0)

    def test_estimated_input_rejected(self):
        net = BayesianNetwork.empty(2)
        with pytest.raises(ContractError):
            record_actual(net, FitnessStatsPool(), np.array([0, 1]), 1.0, Provenance.ESTIMATED)
        with pytest.raises(ContractError):
            record_many(net, FitnessStatsPool(), np.zeros((1, 2), dtype=np.uint8), [1.0],
                        Provenance.ESTIMATED)

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            record_actual(BayesianNetwork.empty(3), FitnessStatsPool(), np.array([0, 1]), 1.0)

    def test_batch_matches_one_by_one(self):
        rng = derive_stream(10)
        X = oracles.planted_data(rng, 150, 6)
        f = rng.normal(size=150)
        a = learn_network(X)
        b = learn_network(X)
        pa, pb = FitnessStatsPool(), FitnessStatsPool()
        record_many(a, pa, X, f)
        for row, v in zip(X, f):
            record_actual(b, pb, row, v)
        assert pa == pb
        for la, lb in zip(a.leaves(), b.leaves()):
            assert (la.fit_count0, la.fit_count1) == (lb.fit_count0, lb.fit_count1)
            assert la.fit_sum0 == pytest.approx(lb.fit_sum0, abs=1e-12)
            assert la.fit_sum1 == pytest.approx(lb.fit_sum1, abs=1e-12)


class TestLeafMeans:
    def test_mean(self):
        assert leaf_fitness_mean(Leaf(fit_sum1=5.0, fit_count1=2), 1, 0.0) == 2.5

    def test_fallback(self):
        assert leaf_fitness_mean(Leaf(), 0, 1.25) == 1.25
        assert leaf_condition_mean(Leaf(), 1.25) == 1.25

    def test_balanced_condition_mean(self):
        leaf = Leaf(1, 1, 0.0, 3.0, 1, 1)
        assert leaf_probability(leaf) == 0.5
        assert leaf_condition_mean(leaf, 99.0) == 1.5
        assert leaf_condition_mean(leaf, 99.0, p1=0.5) == 1.5

    def test_one_sided(self):
        leaf = Leaf(0, 10**6, fit_sum1=2.0 * 10**6, fit_count1=10**6)
        assert leaf_condition_mean(leaf, 0.0) == 2.0
        assert leaf_condition_mean(leaf, 0.0, p1=leaf_probability(leaf)) == 2.0

    @given(st.integers(1, 50), st.integers(1, 50), st.floats(-10, 10), st.floats(-10, 10))
    def test_frequency_weighted(self, c0, c1, m0, m1):
        # weights recomputed from the same records that produced the means
        leaf = Leaf(c0, c1, m0 * c0, m1 * c1, c0, c1)
        p1 = c1 / (c0 + c1)
        expected = (1 - p1) * leaf_fitness_mean(leaf, 0, 0) + p1 * leaf_fitness_mean(leaf, 1, 0)
        assert leaf_condition_mean(leaf, 0.0) == pytest.approx(expected, abs=1e-9)
        assert leaf_condition_mean(leaf, 0.0, p1=p1) == pytest.approx(expected, abs=1e-9)


class TestEstimate:
    def test_worked_example(self):
        net = worked_net()
        pool = fed(net, WORKED_POOL)
        assert pool.mean == 1.25
        assert estimate_fitness(net, pool, np.array([1, 1])) == pytest.approx(3.0, abs=1e-12)
        assert estimate_fitness(net, pool, np.array([0, 0])) == pytest.approx(2.0, abs=1e-12)
        for bits, _ in WORKED_POOL:
            assert estimate_fitness(net, pool, np.array(bits)) == pytest.approx(
                oracles.estimate(net, WORKED_POOL, bits), abs=1e-12)

    def test_onemax_pool_without_edges(self):
        net = BayesianNetwork.empty(2)
        pool = fed(net, ONEMAX_POOL)
        assert estimate_fitness(net, pool, np.array([1, 1])) == 2.0
        assert estimate_fitness(net, pool, np.array([0, 0])) == 0.0

    def test_single_record(self):
        net = worked_net()
        pool = fed(net, [((1, 0), 4.0)])
        assert estimate_fitness(net, pool, np.array([1, 0])) == 4.0
        assert estimate_fitness(net, pool, np.array([0, 1])) == 4.0

    def test_not_ready(self):
        with pytest.raises(NotReadyError):
            estimate_fitness(BayesianNetwork.empty(2), FitnessStatsPool(), np.array([0, 1]))
        with pytest.raises(NotReadyError):
            umda_estimate(UmdaFitnessModel(2), np.array([0, 1]))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_against_pool_scan(self, seed):
        rng = derive_stream(seed)
        net, pool, records = random_fixture(rng)
        probes = rng.integers(0, 2, size=(10, net.n), dtype=np.uint8)
        fast = estimate_many(net, pool, probes)
        for row, value in zip(probes, fast):
            expected = oracles.estimate(net, records, row.tolist())
            assert estimate_fitness(net, pool, row) == pytest.approx(expected, abs=1e-9)
            assert value == pytest.approx(expected, abs=1e-9)

    @pytest.mark.parametrize("n", [1, 4, 10])
    def test_linear_function_is_exact(self, n):
        rng = derive_stream(n)
        w = rng.normal(size=n)
        c = rng.normal()
        X = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.uint8)
        f = X @ w + c
        net = BayesianNetwork.empty(n)
        pool = FitnessStatsPool()
        record_many(net, pool, X, f)
        np.testing.assert_allclose(estimate_many(net, pool, X), f, atol=1e-9)


class TestUmda:
    def test_onemax_pool(self):
        model = UmdaFitnessModel(2)
        for bits, f in ONEMAX_POOL:
            model.record(bits, f)
        assert umda_estimate(model, [1, 1]) == 2.0
        assert np.all(model.counts.sum(axis=1) == model.global_count)

    def test_uniform_fitness(self):
        rng = derive_stream(1)
        model = UmdaFitnessModel(6)
        for row in rng.integers(0, 2, size=(30, 6)):
            model.record(row, 7.5)
        for row in rng.integers(0, 2, size=(30, 6)):
            assert umda_estimate(model, row) == pytest.approx(7.5)

    def test_matches_edge_free_network(self):
        rng = derive_stream(2)
        for _ in range(200):
            n = int(rng.integers(1, 9))
            rows = int(rng.integers(1, 60))
            X = rng.integers(0, 2, size=(rows, n), dtype=np.uint8)
            f = rng.normal(size=rows)
            model = UmdaFitnessModel(n)
            net = BayesianNetwork.empty(n)
            pool = FitnessStatsPool()
            for row, v in zip(X, f):
                model.record(row, v)
                record_actual(net, pool, row, v)
            for row in rng.integers(0, 2, size=(3, n), dtype=np.uint8):
                assert estimate_fitness(net, pool, row) == pytest.approx(umda_estimate(model, row), abs=1e-9)


class TestReset:
    def test_clears_everything(self):
        net = worked_net()
        pool = fed(net, WORKED_POOL)
        before = dump_model(net)
        reset(net, pool)
        assert pool.global_count == 0
        assert all(l.fit_count0 == l.fit_count1 == 0 for l in net.leaves())
        reset(net, pool)
        assert pool.global_count == 0
        structure = [line.split()[:3] for line in dump_model(net).splitlines()]
        assert structure == [line.split()[:3] for line in before.splitlines()]


def test_onemax_leaf_deviation_near_half():
    problem = onemax(50)
    cfg = BoaConfig(population_size=1000)
    rng = derive_stream(5)
    pop = random_population(50, 1000, rng)
    pop.assign(slice(None), problem.evaluate_many(pop.bits), Provenance.ACTUAL)
    _, stats = generation_step(pop, cfg, problem, rng)
    fbar = stats.pool.mean
    devs = [leaf_fitness_mean(l, 1, fbar) - leaf_condition_mean(l, fbar) for l in stats.network.leaves()]
    assert 0.3 <= np.mean(devs) <= 0.7
