"""Bit-string individuals, populations and seeded random streams."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

RandomStream = np.random.Generator


class Provenance(enum.IntEnum):
    UNEVALUATED = 0
    ACTUAL = 1
    ESTIMATED = 2


class ContractError(RuntimeError):
    """Raised when a caller breaks an operation's precondition."""


@dataclass
class Individual:
    bits: np.ndarray
    fitness: float = float("nan")
    provenance: Provenance = Provenance.UNEVALUATED

    def __len__(self) -> int:
        return len(self.bits)


@dataclass
class Population:
    """Population stored column-wise: one row of ``bits`` per member.

    Bits are a ``uint8`` matrix of shape (N, n). ``fitness`` and
    ``provenance`` are parallel length-N arrays.
    """

    bits: np.ndarray
    fitness: np.ndarray = None
    provenance: np.ndarray = None
    generation: int = 0

    def __post_init__(self):
        self.bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if self.bits.ndim != 2:
            raise ValueError("bits must be a 2-d array (members x positions)")
        size = self.bits.shape[0]
        if self.fitness is None:
            self.fitness = np.full(size, np.nan)
        if self.provenance is None:
            self.provenance = np.full(size, Provenance.UNEVALUATED, dtype=np.int8)
        self.fitness = np.asarray(self.fitness, dtype=float)
        self.provenance = np.asarray(self.provenance, dtype=np.int8)
        if self.fitness.shape != (size,) or self.provenance.shape != (size,):
            raise ValueError("fitness and provenance must have one entry per member")

    @property
    def size(self) -> int:
        return self.bits.shape[0]

    @property
    def n(self) -> int:
        return self.bits.shape[1]

    def __len__(self) -> int:
        return self.size

    def __getitem__(self, index: int) -> Individual:
        return Individual(
            self.bits[index].copy(),
            float(self.fitness[index]),
            Provenance(int(self.provenance[index])),
        )

    def assign(self, index, fitness, provenance: Provenance) -> None:
        self.fitness[index] = fitness
        self.provenance[index] = provenance

    def evaluated(self) -> bool:
        return bool(np.all(self.provenance != Provenance.UNEVALUATED))

    @classmethod
    def from_individuals(cls, members: Sequence[Individual], generation: int = 0) -> "Population":
        if not members:
            raise ValueError("population must not be empty")
        lengths = {len(m.bits) for m in members}
        if len(lengths) != 1:
            raise ValueError("all members must share one bit-string length")
        return cls(
            np.stack([np.asarray(m.bits, dtype=np.uint8) for m in members]),
            np.array([m.fitness for m in members], dtype=float),
            np.array([int(m.provenance) for m in members], dtype=np.int8),
            generation,
        )


def derive_stream(master_seed: int, stream_id: Union[int, Sequence[int]] = 0) -> RandomStream:
    """Independent generator for ``(master_seed, stream_id)``.

    ``stream_id`` may be a tuple of non-negative ints, e.g.
    ``(experiment, population_size, run)``. Streams depend only on their
    key, never on creation order.
    """
    key = (stream_id,) if isinstance(stream_id, (int, np.integer)) else tuple(stream_id)
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))


def random_population(n: int, size: int, rng: RandomStream) -> Population:
    if n < 1 or size < 1:
        raise ValueError(f"need n >= 1 and N >= 1, got n={n}, N={size}")
    bits = rng.integers(0, 2, size=(size, n), dtype=np.uint8)
    return Population(bits)


def best_index(fitness: np.ndarray, provenance: np.ndarray) -> int:
    if len(fitness) == 0:
        raise ContractError("best_of on an empty population")
    if np.any(provenance == Provenance.UNEVALUATED):
        raise ContractError("best_of requires every member to be evaluated")
    # argmax returns the first maximal index
    return int(np.argmax(fitness))


def best_of(pop: Population) -> Individual:
    return pop[best_index(pop.fitness, pop.provenance)]
