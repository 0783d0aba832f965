"""Bisection population sizing and inheritance-proportion sweeps."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import derive_stream
from .engine import BoaConfig, Termination, run_boa
from .problems import Problem

log = logging.getLogger(__name__)

N0 = 64
MAX_POPULATION = 2 ** 24
BRACKET = 1.1
RUNS_PER_PROBE = 10


def _paper_grid() -> Tuple[float, ...]:
    coarse = [k / 10 for k in range(10)]
    fine = [0.9 + k / 100 for k in range(1, 10)]
    finer = [0.99 + k / 1000 for k in range(1, 10)]
    return tuple(round(p, 3) for p in coarse + fine + finer)


PAPER_GRID = _paper_grid()
DESK_GRID = (0.0, 0.5, 0.9, 0.99)


@dataclass
class BisectionResult:
    min_population: Optional[int]
    runs_evaluations: List[int]
    probes: List[Tuple[int, bool]] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.min_population is not None


@dataclass(frozen=True)
class SweepRow:
    problem: str
    n: int
    proportion: float
    experiment: int
    seed: int
    min_population: int
    mean_actual_evaluations: float
    speedup: Optional[float] = None


def experiment_config() -> BoaConfig:
    """Template used by sweeps: runs continue until the population converges."""
    return BoaConfig(population_size=N0, termination=Termination.CONVERGED)


ProbeFn = Callable[[int], Tuple[bool, List[int]]]


def bisect(probe: ProbeFn, n0: int = N0, cap: int = MAX_POPULATION,
           bracket: float = BRACKET) -> BisectionResult:
    """Smallest population for which ``probe`` succeeds, to within ``bracket``.

    Doubles from ``n0`` until a probe succeeds, then halves the interval
    between the last failure and the first success until
    ``high <= bracket * low``.
    """
    probes: List[Tuple[int, bool]] = []
    evals: Dict[int, List[int]] = {}

    def check(N: int) -> bool:
        ok, counts = probe(N)
        probes.append((N, ok))
        if ok:
            evals[N] = list(counts)
        return ok

    N = n0
    low = None
    while not check(N):
        low = N
        if N >= cap:
            return BisectionResult(None, [], probes)
        N = min(2 * N, cap)
    high = N
    if low is not None:
        while high > bracket * low:
            mid = (low + high) // 2
            if mid in (low, high):
                break
            if check(mid):
                high = mid
            else:
                low = mid
    return BisectionResult(high, evals[high], probes)


def probe_population(problem: Problem, cfg: BoaConfig, N: int, seed: int,
                     runs: int = RUNS_PER_PROBE) -> Tuple[bool, List[int]]:
    """Run ``runs`` independent BOA runs at population ``N``; stop at the first failure."""
    cfg = replace(cfg, population_size=N)
    counts = []
    for run in range(runs):
        stats = run_boa(cfg, problem, derive_stream(seed, (N, run)))
        if not stats.succeeded:
            return False, counts
        counts.append(stats.actual_evaluations)
    return True, counts


def bisect_min_popsize(problem: Problem, cfg: BoaConfig, runs_per_probe: int = RUNS_PER_PROBE,
                       seed: int = 0) -> BisectionResult:
    if runs_per_probe < 1:
        raise ValueError("runs_per_probe must be at least 1")
    return bisect(lambda N: probe_population(problem, cfg, N, seed, runs_per_probe))


def experiment_seed(master_seed: int, experiment: int) -> int:
    """Seed for one experiment; shared by every proportion so sweeps are paired."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(experiment),))
    return int(seq.generate_state(1)[0])


def run_experiment(problem: Problem, proportion: float, seed: int,
                   cfg: Optional[BoaConfig] = None, experiment: int = 0,
                   runs_per_probe: int = RUNS_PER_PROBE) -> SweepRow:
    base = cfg or experiment_config()
    base = replace(base, inheritance_proportion=proportion)
    result = bisect_min_popsize(problem, base, runs_per_probe, seed)
    if not result.converged:
        raise RuntimeError(f"{problem.name} p={proportion}: no population up to "
                           f"{MAX_POPULATION} succeeded; probes {result.probes}")
    log.info("%s n=%d p=%g exp=%d: N*=%d", problem.name, problem.n, proportion,
             experiment, result.min_population)
    return SweepRow(problem.name, problem.n, proportion, experiment, seed,
                    result.min_population, float(np.mean(result.runs_evaluations)))


def _job(args):
    problem, proportion, seed, cfg, experiment, runs = args
    return run_experiment(problem, proportion, seed, cfg, experiment, runs)


def worker_count() -> int:
    """Worker processes from ``BOA_THREADS``; 0 or unset means sequential."""
    raw = os.environ.get("BOA_THREADS", "0").strip() or "0"
    value = int(raw)
    if value < 0:
        raise ValueError("BOA_THREADS must be non-negative")
    return value


def sweep_proportions(problem: Problem, grid: Sequence[float], experiments_per_point: int,
                      master_seed: int, cfg: Optional[BoaConfig] = None,
                      runs_per_probe: int = RUNS_PER_PROBE,
                      workers: Optional[int] = None) -> List[SweepRow]:
    """Every (proportion, experiment) pair, ordered by proportion then experiment."""
    for p in grid:
        if not 0 <= p < 1:
            raise ValueError(f"proportion {p} outside [0, 1)")
    jobs = [(problem, p, experiment_seed(master_seed, e), cfg, e, runs_per_probe)
            for p in grid for e in range(experiments_per_point)]
    workers = worker_count() if workers is None else workers
    if workers <= 0 or len(jobs) <= 1:
        return [_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_job, jobs))


def speedup(rows: Sequence[SweepRow]) -> Dict[float, Tuple[float, float]]:
    """Per proportion: (mean actual evaluations, baseline / that mean)."""
    by_p: Dict[float, List[float]] = {}
    for row in rows:
        by_p.setdefault(row.proportion, []).append(row.mean_actual_evaluations)
    if 0.0 not in by_p:
        raise ValueError("speedup needs rows at proportion 0")
    means = {p: float(np.mean(v)) for p, v in sorted(by_p.items())}
    base = means[0.0]
    return {p: (m, 1.0 if p == 0.0 else base / m) for p, m in means.items()}


def with_speedup(rows: Sequence[SweepRow]) -> List[SweepRow]:
    """Copy of ``rows`` with the speedup column filled per problem."""
    out = []
    groups: Dict[Tuple[str, int], List[SweepRow]] = {}
    for row in rows:
        groups.setdefault((row.problem, row.n), []).append(row)
    factors = {}
    for key, group in groups.items():
        if any(r.proportion == 0.0 for r in group):
            factors[key] = {p: s for p, (_, s) in speedup(group).items()}
    for row in rows:
        s = factors.get((row.problem, row.n), {}).get(row.proportion)
        out.append(replace(row, speedup=s))
    return out
