"""Onemax and concatenated trap benchmarks."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Kind(enum.Enum):
    ONEMAX = "onemax"
    TRAP = "trap"


def trap(u, k: int):
    """Order-k trap of the unitation ``u``; works elementwise on arrays."""
    u = np.asarray(u)
    return np.where(u == k, k, k - 1 - u)


@dataclass(frozen=True)
class Problem:
    kind: Kind
    n: int
    k: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.kind is Kind.TRAP:
            if self.k < 2:
                raise ValueError("trap block size must be at least 2")
            if self.n % self.k:
                raise ValueError(f"n={self.n} is not a multiple of the block size {self.k}")

    @property
    def name(self) -> str:
        return "onemax" if self.kind is Kind.ONEMAX else f"trap{self.k}"

    @property
    def blocks(self) -> int:
        return self.n // self.k if self.kind is Kind.TRAP else self.n

    @property
    def optimum_value(self) -> float:
        return float(self.n)

    def _check(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits)
        if bits.shape[-1] != self.n:
            raise ValueError(f"expected {self.n} bits, got {bits.shape[-1]}")
        return bits

    def evaluate(self, bits) -> float:
        return float(self.evaluate_many(np.asarray(bits)[None, :])[0])

    def evaluate_many(self, bits: np.ndarray) -> np.ndarray:
        """Fitness of every row of an (N, n) bit matrix."""
        bits = self._check(bits)
        if bits.ndim != 2:
            raise ValueError("evaluate_many expects a 2-d array")
        if self.kind is Kind.ONEMAX:
            return bits.sum(axis=1, dtype=np.int64).astype(float)
        u = bits.reshape(bits.shape[0], self.blocks, self.k).sum(axis=2, dtype=np.int64)
        return trap(u, self.k).sum(axis=1).astype(float)

    def fraction_correct(self, bits) -> float:
        bits = self._check(bits)
        return float(np.count_nonzero(bits)) / self.n

    def is_success(self, bits, threshold: float = 0.9) -> bool:
        if not 0 < threshold <= 1:
            raise ValueError("threshold must lie in (0, 1]")
        ones = int(np.count_nonzero(self._check(bits)))
        # tolerance absorbs float error in threshold * n, e.g. 0.9 * 50
        return ones >= threshold * self.n - 1e-9


def onemax(n: int = 50) -> Problem:
    return Problem(Kind.ONEMAX, n)


def trap4(n: int = 40) -> Problem:
    return Problem(Kind.TRAP, n, 4)


def trap5(n: int = 50) -> Problem:
    return Problem(Kind.TRAP, n, 5)


PROBLEMS = {"onemax": (onemax, 50), "trap4": (trap4, 40), "trap5": (trap5, 50)}


def make_problem(name: str, n: int | None = None) -> Problem:
    try:
        factory, default_n = PROBLEMS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
    return factory(default_n if n is None else n)
