"""Fitness inheritance statistics and estimators.

Every leaf of every tree keeps, for X_i = 0 and X_i = 1, the sum and count
of actual fitness values of the solutions routed to it. An offspring's
fitness is then estimated as the global mean plus, per variable, the
deviation of its value's mean from the mean of the whole leaf.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bayesnet import BayesianNetwork, Leaf
from .core import ContractError, Provenance


class NotReadyError(RuntimeError):
    """Estimation requested before any actual fitness was recorded."""


@dataclass
class FitnessStatsPool:
    global_sum: float = 0.0
    global_count: int = 0

    @property
    def mean(self) -> float:
        if self.global_count == 0:
            raise NotReadyError("no actual evaluations recorded")
        return self.global_sum / self.global_count

    def reset(self) -> None:
        self.global_sum = 0.0
        self.global_count = 0


def _check_actual(provenance) -> None:
    if np.any(np.asarray(provenance) != Provenance.ACTUAL):
        raise ContractError("only actually evaluated solutions may feed fitness statistics")


def record_actual(net: BayesianNetwork, pool: FitnessStatsPool, bits, fitness: float,
                  provenance: Provenance = Provenance.ACTUAL) -> None:
    _check_actual(provenance)
    bits = np.asarray(bits)
    if bits.shape != (net.n,):
        raise ValueError(f"expected {net.n} bits")
    for tree in net.trees:
        leaf = tree.leaf_for(bits)
        if bits[tree.target]:
            leaf.fit_sum1 += fitness
            leaf.fit_count1 += 1
        else:
            leaf.fit_sum0 += fitness
            leaf.fit_count0 += 1
    pool.global_sum += fitness
    pool.global_count += 1


def record_many(net: BayesianNetwork, pool: FitnessStatsPool, X: np.ndarray,
                fitness: np.ndarray, provenance=Provenance.ACTUAL, leaf_ids=None) -> None:
    """Batch ``record_actual`` over the rows of ``X``.

    ``leaf_ids`` may carry precomputed per-tree leaf numbers for ``X``.
    """
    _check_actual(provenance)
    X = np.asarray(X)
    fitness = np.asarray(fitness, dtype=float)
    if X.shape[0] == 0:
        return
    for tree in net.trees:
        leaves = tree.leaves
        ids = tree.leaf_index(X) if leaf_ids is None else leaf_ids[tree.target]
        key = 2 * ids + X[:, tree.target]
        sums = np.bincount(key, weights=fitness, minlength=2 * len(leaves))
        counts = np.bincount(key, minlength=2 * len(leaves))
        for k, leaf in enumerate(leaves):
            leaf.fit_sum0 += sums[2 * k]
            leaf.fit_count0 += int(counts[2 * k])
            leaf.fit_sum1 += sums[2 * k + 1]
            leaf.fit_count1 += int(counts[2 * k + 1])
    # accumulate in row order so batch and one-by-one recording agree exactly
    total = pool.global_sum
    for f in fitness.tolist():
        total += f
    pool.global_sum = total
    pool.global_count += len(fitness)


def leaf_fitness_mean(leaf: Leaf, x: int, fallback: float) -> float:
    count = leaf.fit_count(x)
    return leaf.fit_sum(x) / count if count > 0 else fallback


def leaf_condition_mean(leaf: Leaf, fallback: float, p1: Optional[float] = None) -> float:
    """Mean fitness of the recorded solutions that satisfy the leaf's condition.

    This is sum_x p(x) * mean(x) with p the frequency of X_i = 1 among those
    same solutions. Passing ``p1`` weights the two means by another
    probability instead (e.g. the leaf's model probability). With data for
    only one value, that value's mean stands in for both.
    """
    has0, has1 = leaf.fit_count0 > 0, leaf.fit_count1 > 0
    if has0 and has1:
        if p1 is None:
            return (leaf.fit_sum0 + leaf.fit_sum1) / (leaf.fit_count0 + leaf.fit_count1)
        return (1.0 - p1) * leaf.fit_sum0 / leaf.fit_count0 + p1 * leaf.fit_sum1 / leaf.fit_count1
    if has1:
        return leaf.fit_sum1 / leaf.fit_count1
    if has0:
        return leaf.fit_sum0 / leaf.fit_count0
    return fallback


def estimate_fitness(net: BayesianNetwork, pool: FitnessStatsPool, bits) -> float:
    fbar = pool.mean
    bits = np.asarray(bits)
    total = fbar
    for tree in net.trees:
        leaf = tree.leaf_for(bits)
        x = int(bits[tree.target])
        if leaf.fit_count(x) > 0:
            total += leaf_fitness_mean(leaf, x, fbar) - leaf_condition_mean(leaf, fbar)
    return total


def _leaf_tables(tree, fbar):
    leaves = tree.leaves
    L = len(leaves)
    mean = np.zeros((L, 2))
    has = np.zeros((L, 2), dtype=bool)
    cond = np.empty(L)
    for k, leaf in enumerate(leaves):
        for x in (0, 1):
            c = leaf.fit_count(x)
            if c > 0:
                has[k, x] = True
                mean[k, x] = leaf.fit_sum(x) / c
        cond[k] = leaf_condition_mean(leaf, fbar)
    return mean, has, cond


def estimate_many(net: BayesianNetwork, pool: FitnessStatsPool, X: np.ndarray,
                  leaf_ids=None) -> np.ndarray:
    """Vectorized ``estimate_fitness`` over the rows of ``X``."""
    fbar = pool.mean
    X = np.asarray(X)
    total = np.full(X.shape[0], fbar)
    if X.shape[0] == 0:
        return total
    for tree in net.trees:
        ids = tree.leaf_index(X) if leaf_ids is None else leaf_ids[tree.target]
        mean, has, cond = _leaf_tables(tree, fbar)
        x = X[:, tree.target].astype(np.intp)
        term = np.where(has[ids, x], mean[ids, x] - cond[ids], 0.0)
        total += term
    return total


def reset(net: BayesianNetwork, pool: Optional[FitnessStatsPool] = None) -> None:
    for leaf in net.leaves():
        leaf.clear_fitness()
    if pool is not None:
        pool.reset()


@dataclass
class UmdaFitnessModel:
    """Probability vector extended with per-position fitness sums for 0 and 1."""

    n: int
    sums: np.ndarray = field(default=None)
    counts: np.ndarray = field(default=None)
    global_sum: float = 0.0
    global_count: int = 0

    def __post_init__(self):
        if self.sums is None:
            self.sums = np.zeros((self.n, 2))
        if self.counts is None:
            self.counts = np.zeros((self.n, 2), dtype=np.int64)

    def record(self, bits, fitness: float) -> None:
        bits = np.asarray(bits).astype(np.intp)
        pos = np.arange(self.n)
        self.sums[pos, bits] += fitness
        self.counts[pos, bits] += 1
        self.global_sum += fitness
        self.global_count += 1

    @property
    def mean(self) -> float:
        if self.global_count == 0:
            raise NotReadyError("no actual evaluations recorded")
        return self.global_sum / self.global_count


def umda_estimate(model: UmdaFitnessModel, bits) -> float:
    fbar = model.mean
    bits = np.asarray(bits).astype(np.intp)
    pos = np.arange(model.n)
    c = model.counts[pos, bits]
    s = model.sums[pos, bits]
    with np.errstate(divide="ignore", invalid="ignore"):
        dev = np.where(c > 0, s / np.maximum(c, 1) - fbar, 0.0)
    return fbar + float(dev.sum())
