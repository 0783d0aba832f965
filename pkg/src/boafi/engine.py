"""The BOA generational loop with fitness inheritance."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple, Union

import numpy as np

from .bayesnet import BayesianNetwork, Mode, ScoreParams, learn_network, sample
from .core import ContractError, Population, Provenance, RandomStream, best_index, random_population
from .fitmodel import FitnessStatsPool, estimate_many, record_many
from .problems import Problem


@dataclass(frozen=True)
class Truncation:
    tau: float = 0.5

    def __post_init__(self):
        if not 0 < self.tau <= 1:
            raise ValueError("truncation ratio must lie in (0, 1]")


@dataclass(frozen=True)
class Tournament:
    size: int = 2

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("tournament size must be positive")


Selection = Union[Truncation, Tournament]


class Termination(enum.Enum):
    BEST = "best"  # stop once the best member by assigned fitness is a success
    CONVERGED = "converged"  # stop once the population converges; judge its consensus


@dataclass(frozen=True)
class BoaConfig:
    population_size: int
    inheritance_proportion: float = 0.0
    selection: Selection = Truncation()
    score: ScoreParams = ScoreParams()
    mode: Mode = Mode.TREE
    max_generations: Optional[int] = None  # None means 5 * n
    success_threshold: float = 0.9
    termination: Termination = Termination.BEST
    convergence_epsilon: float = 0.1  # above the Laplace leakage floor of small populations

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population size must be at least 2")
        if not 0 <= self.inheritance_proportion < 1:
            raise ValueError("inheritance proportion must lie in [0, 1)")
        if not 0 < self.success_threshold <= 1:
            raise ValueError("success threshold must lie in (0, 1]")

    def generation_cap(self, n: int) -> int:
        return 5 * n if self.max_generations is None else self.max_generations


@dataclass
class GenerationStats:
    actual_evaluations: int
    estimated: int
    network: BayesianNetwork
    pool: FitnessStatsPool
    parents: Population


@dataclass
class RunStats:
    actual_evaluations: int
    generations_run: int
    succeeded: bool
    best_true_fitness: float


def select(pop: Population, cfg: BoaConfig, rng: RandomStream) -> Population:
    if not pop.evaluated():
        raise ContractError("selection needs every member evaluated")
    N = pop.size
    sel = cfg.selection
    if isinstance(sel, Truncation):
        keep = math.ceil(sel.tau * N)
        order = np.argsort(-pop.fitness, kind="stable")
        idx = np.sort(order[:keep])
    else:
        draws = rng.integers(0, N, size=(N, sel.size))
        f = pop.fitness[draws]
        top = f.max(axis=1, keepdims=True)
        idx = np.where(f == top, draws, N).min(axis=1)
    return Population(pop.bits[idx], pop.fitness[idx], pop.provenance[idx], pop.generation)


def estimated_count(offspring_count: int, proportion: float) -> int:
    k = math.floor(proportion * offspring_count + 0.5)
    # at least one actual evaluation per generation
    return max(0, min(k, offspring_count - 1))


def inheritance_partition(offspring_count: int, proportion: float,
                          rng: RandomStream) -> Tuple[np.ndarray, np.ndarray]:
    """Split offspring indices into (estimate, evaluate) sets."""
    if not 0 <= proportion < 1:
        raise ValueError("inheritance proportion must lie in [0, 1)")
    k = estimated_count(offspring_count, proportion)
    everyone = np.arange(offspring_count)
    if k == 0:
        return everyone[:0], everyone
    mask = np.zeros(offspring_count, dtype=bool)
    mask[rng.choice(offspring_count, size=k, replace=False)] = True
    return everyone[mask], everyone[~mask]


def _subset(leaf_ids, idx):
    return [ids[idx] for ids in leaf_ids]


def generation_step(pop: Population, cfg: BoaConfig, problem: Problem,
                    rng: RandomStream) -> Tuple[Population, GenerationStats]:
    parents = select(pop, cfg, rng)
    parent_ids = []
    net = learn_network(parents.bits, cfg.score, cfg.mode, parent_ids)

    pool = FitnessStatsPool()
    actual = np.flatnonzero(parents.provenance == Provenance.ACTUAL)
    record_many(net, pool, parents.bits[actual], parents.fitness[actual],
                leaf_ids=_subset(parent_ids, actual))

    N = pop.size
    leaf_ids = []
    X = sample(net, N, rng, leaf_ids)
    est, ev = inheritance_partition(N, cfg.inheritance_proportion, rng)

    fitness = np.empty(N)
    provenance = np.empty(N, dtype=np.int8)
    fitness[ev] = problem.evaluate_many(X[ev])
    provenance[ev] = Provenance.ACTUAL
    record_many(net, pool, X[ev], fitness[ev], leaf_ids=_subset(leaf_ids, ev))

    if len(est):
        fitness[est] = estimate_many(net, pool, X[est], leaf_ids=_subset(leaf_ids, est))
        provenance[est] = Provenance.ESTIMATED

    offspring = Population(X, fitness, provenance, pop.generation + 1)
    return offspring, GenerationStats(len(ev), len(est), net, pool, parents)


def converged(pop: Population, epsilon: float) -> bool:
    """True when every position's minority value has frequency <= ``epsilon``."""
    freq = pop.bits.mean(axis=0)
    return bool(np.all(np.minimum(freq, 1.0 - freq) <= epsilon))


def consensus(pop: Population) -> np.ndarray:
    return (2 * pop.bits.sum(axis=0, dtype=np.int64) >= pop.size).astype(np.uint8)


def run_boa(cfg: BoaConfig, problem: Problem, rng: RandomStream,
            on_generation: Optional[Callable[[Population, GenerationStats], None]] = None) -> RunStats:
    """One BOA run.

    With ``Termination.BEST`` the run stops as soon as the best member by
    assigned fitness is a success; that check uses the true fitness but is
    not counted. With ``Termination.CONVERGED`` the run stops when the
    population converges and succeeds iff the consensus string does.
    Either way the run gives up after ``cfg.generation_cap(n)`` generations.
    """
    N = cfg.population_size
    pop = random_population(problem.n, N, rng)
    pop.assign(slice(None), problem.evaluate_many(pop.bits), Provenance.ACTUAL)
    evaluations = N
    cap = cfg.generation_cap(problem.n)

    def best_bits(p):
        return p.bits[best_index(p.fitness, p.provenance)]

    def finished(p):
        if cfg.termination is Termination.BEST:
            return problem.is_success(best_bits(p), cfg.success_threshold)
        return converged(p, cfg.convergence_epsilon)

    generations = 0
    done = finished(pop)
    while not done and generations < cap:
        pop, stats = generation_step(pop, cfg, problem, rng)
        evaluations += stats.actual_evaluations
        generations += 1
        if on_generation is not None:
            on_generation(pop, stats)
        done = finished(pop)

    if cfg.termination is Termination.BEST:
        final = best_bits(pop)
        succeeded = done
    else:
        final = consensus(pop)
        succeeded = done and problem.is_success(final, cfg.success_threshold)
    return RunStats(evaluations, generations, succeeded, problem.evaluate(final))
