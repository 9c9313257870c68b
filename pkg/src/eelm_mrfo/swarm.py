"""State and result containers shared by every population-based minimizer."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

Objective = Callable[[np.ndarray], float]


@dataclass
class SwarmState:
    """Mutable snapshot of a population at one point of an optimization run.

    ``best_fitness`` is the minimum over every fitness evaluated so far, so it
    can be strictly lower than ``fitnesses.min()`` once agents have moved on.
    """

    positions: np.ndarray
    fitnesses: np.ndarray
    best_position: np.ndarray
    best_fitness: float
    iteration: int
    max_iterations: int
    lower: np.ndarray
    upper: np.ndarray

    @property
    def n_agents(self) -> int:
        return self.positions.shape[0]

    @property
    def dimension(self) -> int:
        return self.positions.shape[1]

    def update_best(self, positions: np.ndarray, fitnesses: np.ndarray) -> None:
        # strict less-than keeps the first agent that reaches a value
        for x, f in zip(positions, fitnesses):
            if f < self.best_fitness:
                self.best_fitness = float(f)
                self.best_position = x.copy()


@dataclass
class OptimizeResult:
    best_position: np.ndarray
    best_fitness: float
    history: np.ndarray
    n_evaluations: int
    final_state: Optional[SwarmState] = field(default=None, repr=False)


def as_bounds(lower, upper, dimension: int) -> tuple[np.ndarray, np.ndarray]:
    """Broadcast scalar or vector bounds to ``dimension`` and validate them."""
    lo = np.broadcast_to(np.asarray(lower, dtype=float), (dimension,)).copy()
    hi = np.broadcast_to(np.asarray(upper, dtype=float), (dimension,)).copy()
    if not np.all(lo < hi):
        raise ValueError("lower bound must be strictly below upper bound in every dimension")
    return lo, hi


def sanitize(value) -> float:
    """Map non-finite objective values to +inf so they never become best."""
    value = float(value)
    return value if math.isfinite(value) else math.inf


def evaluate(objective: Objective, positions: np.ndarray, executor=None) -> np.ndarray:
    """Evaluate ``objective`` row by row, optionally through an executor.

    Results are collected in row order, so serial and pooled evaluation give
    identical arrays.
    """
    rows = list(positions)
    if executor is None:
        values = [objective(x) for x in rows]
    else:
        values = list(executor.map(objective, rows))
    return np.array([sanitize(v) for v in values], dtype=float)


def initial_state(objective: Objective, n_agents: int, lower: np.ndarray, upper: np.ndarray,
                  max_iterations: int, rng: np.random.Generator, executor=None) -> SwarmState:
    positions = lower + rng.random((n_agents, lower.shape[0])) * (upper - lower)
    fitnesses = evaluate(objective, positions, executor)
    best = int(np.argmin(fitnesses))
    return SwarmState(
        positions=positions,
        fitnesses=fitnesses,
        best_position=positions[best].copy(),
        best_fitness=float(fitnesses[best]),
        iteration=0,
        max_iterations=max_iterations,
        lower=lower,
        upper=upper,
    )
