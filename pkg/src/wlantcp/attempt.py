"""Per-slot attempt probability of saturated DCF contenders.

Binary exponential backoff fixed point: a node attempts with probability
``beta = G(gamma)`` where ``gamma = 1 - (1 - beta)**(n - 1)`` is the
conditional collision probability seen by one of ``n`` contenders.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidParameterError, NumericalFailureError
from .params import PhyMacParams

MAX_ITER = 10_000
RESIDUAL_TOL = 1e-12


def backoff_map(gamma: float, cw_min: int, stages: int) -> float:
    """Attempt probability of a node whose transmissions collide w.p. ``gamma``."""
    # 2(1-2g) / ((1-2g)(W+1) + gW(1-(2g)^m)) with the removable pole at g = 1/2 divided out
    x = 2.0 * gamma
    geom = sum(x ** i for i in range(stages))
    return 2.0 / (cw_min + 1 + gamma * cw_min * geom)


def fixed_point_residual(beta: float, n: int, params: PhyMacParams) -> float:
    gamma = 1.0 - (1.0 - beta) ** (n - 1)
    return beta - backoff_map(gamma, params.cw_min, params.backoff_stages)


@lru_cache(maxsize=4096)
def _solve(n: int, cw_min: int, stages: int) -> float:
    beta = 2.0 / (cw_min + 1)
    for _ in range(MAX_ITER):
        gamma = 1.0 - (1.0 - beta) ** (n - 1)
        target = backoff_map(gamma, cw_min, stages)
        if abs(beta - target) < RESIDUAL_TOL:
            return beta
        beta = 0.5 * (beta + target)
    raise NumericalFailureError(f"attempt probability did not converge for n={n}")


def attempt_probability(n: int, params: PhyMacParams) -> float:
    if n < 1:
        raise InvalidParameterError(f"need at least one contender, got n={n}")
    return _solve(int(n), params.cw_min, params.backoff_stages)


@dataclass(frozen=True)
class AttemptCurve:
    """``beta[n]`` for n = 1..n_max; index 0 is unused (NaN)."""

    beta: np.ndarray

    @property
    def n_max(self) -> int:
        return len(self.beta) - 1

    def __getitem__(self, n: int) -> float:
        if not 1 <= n <= self.n_max:
            raise IndexError(n)
        return float(self.beta[n])


def attempt_curve(n_max: int, params: PhyMacParams) -> AttemptCurve:
    beta = np.full(n_max + 1, np.nan)
    for n in range(1, n_max + 1):
        beta[n] = attempt_probability(n, params)
    return AttemptCurve(beta)
