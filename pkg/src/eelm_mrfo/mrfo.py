"""Manta ray foraging optimization, optionally with a Levy-flight walk.

Each iteration runs a foraging phase (every agent does either cyclone or
chain foraging), evaluates the new positions, then a somersault phase around
the best position found so far. With ``levy`` enabled every agent also takes
a Levy-flight walk right after its somersault, before it is re-evaluated.

Random draws per iteration, in order:

* foraging, for each agent ``i``: ``u = rand()``; if ``u < 0.5`` (cyclone)
  ``u_ref = rand()``, then ``x_rand = lower + rand(D) * (upper - lower)``
  only when ``t / T < u_ref``, then ``r1 = rand(D)`` and ``r = rand(D)``;
  otherwise (chain) ``r = rand(D)``.
* somersault, for each agent: scalars ``r2 = rand()``, ``r3 = rand()``, followed
  when Levy is on by ``mu = rand()``, ``signs = rand(D)``, the numerator
  normals and then the denominator normals of the step.

Position updates in the foraging phase read the positions as they were at
the start of the phase, and the best position is only updated after the
whole phase has been evaluated. That makes every phase order-independent,
so fitness evaluation can be farmed out to an executor without changing
results.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .levy import LevyStepSampler, apply_levy_walk
from .swarm import Objective, OptimizeResult, SwarmState, as_bounds, evaluate, initial_state

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MrfoConfig:
    """Settings for one MRFO run.

    ``levy_scale`` of None means 1% of the box width in each dimension.
    """

    lower: np.ndarray
    upper: np.ndarray
    population_size: int = 20
    max_iterations: int = 50
    somersault_factor: float = 2.0
    levy: bool = False
    levy_exponent: float = 1.5
    levy_scale: float | None = None
    seed: int = 0

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        lo, hi = as_bounds(lo, self.upper, lo.shape[0])
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if self.population_size < 1:
            raise ValueError("population_size must be positive")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be nonnegative")
        if not self.somersault_factor > 0:
            raise ValueError("somersault_factor must be positive")
        if not 0 < self.levy_exponent <= 2:
            raise ValueError("levy_exponent must lie in (0, 2]")

    @classmethod
    def box(cls, dimension: int, lower: float = -1.0, upper: float = 1.0, **kwargs) -> "MrfoConfig":
        return cls(np.full(dimension, lower, dtype=float), np.full(dimension, upper, dtype=float), **kwargs)

    @property
    def dimension(self) -> int:
        return self.lower.shape[0]

    def sampler(self) -> LevyStepSampler:
        scale = 0.01 * (self.upper - self.lower) if self.levy_scale is None else self.levy_scale
        return LevyStepSampler(self.levy_exponent, scale)


def chain_coefficient(r: np.ndarray) -> np.ndarray:
    """``2 r sqrt(|ln r|)``, taken as 0 at ``r == 0``."""
    r = np.asarray(r, dtype=float)
    safe = np.where(r > 0, r, 1.0)
    return np.where(r > 0, 2.0 * r * np.sqrt(np.abs(np.log(safe))), 0.0)


def cyclone_coefficient(r1: np.ndarray, t: int, max_iterations: int) -> np.ndarray:
    r1 = np.asarray(r1, dtype=float)
    return 2.0 * np.exp(r1 * (max_iterations - t + 1) / max_iterations) * np.sin(2.0 * np.pi * r1)


def chain_foraging_step(state: SwarmState, i: int, rng: np.random.Generator | None = None,
                        *, r=None) -> np.ndarray:
    if not 0 <= i < state.n_agents:
        raise IndexError(f"agent index {i} out of range for {state.n_agents} agents")
    if r is None:
        r = rng.random(state.dimension)
    alpha = chain_coefficient(r)
    x = state.positions
    best = state.best_position
    if i == 0:
        new = x[0] + r * (best - x[0]) + alpha * (best - x[0])
    else:
        new = x[i - 1] + r * (x[i - 1] - x[i]) + alpha * (best - x[i])
    return np.clip(new, state.lower, state.upper)


def cyclone_foraging_step(state: SwarmState, i: int, rng: np.random.Generator | None,
                          reference: np.ndarray, *, r1=None, r=None) -> np.ndarray:
    """Spiral move around ``reference`` (the best position or a random point)."""
    if not 0 <= i < state.n_agents:
        raise IndexError(f"agent index {i} out of range for {state.n_agents} agents")
    if r1 is None:
        r1 = rng.random(state.dimension)
    if r is None:
        r = rng.random(state.dimension)
    beta = cyclone_coefficient(r1, state.iteration, state.max_iterations)
    x = state.positions
    ref = np.asarray(reference, dtype=float)
    if i == 0:
        new = ref + r * (ref - x[0]) + beta * (ref - x[0])
    else:
        new = ref + r * (x[i - 1] - x[i]) + beta * (ref - x[i])
    return np.clip(new, state.lower, state.upper)


def somersault_foraging_step(state: SwarmState, i: int, rng: np.random.Generator | None = None,
                             *, somersault_factor: float = 2.0, r2=None, r3=None) -> np.ndarray:
    if r2 is None:
        r2 = rng.random()
    if r3 is None:
        r3 = rng.random()
    x = state.positions[i]
    new = x + somersault_factor * (r2 * state.best_position - r3 * x)
    return np.clip(new, state.lower, state.upper)


def foraging_phase(state: SwarmState, rng: np.random.Generator) -> np.ndarray:
    """New positions for every agent from cyclone or chain foraging."""
    n, dim = state.positions.shape
    progress = state.iteration / state.max_iterations
    new = np.empty_like(state.positions)
    for i in range(n):
        if rng.random() < 0.5:
            if progress < rng.random():
                reference = state.lower + rng.random(dim) * (state.upper - state.lower)
            else:
                reference = state.best_position
            new[i] = cyclone_foraging_step(state, i, rng, reference)
        else:
            new[i] = chain_foraging_step(state, i, rng)
    return new


def somersault_phase(state: SwarmState, rng: np.random.Generator, somersault_factor: float,
                     sampler: LevyStepSampler | None = None) -> np.ndarray:
    new = np.empty_like(state.positions)
    for i in range(state.n_agents):
        x = somersault_foraging_step(state, i, rng, somersault_factor=somersault_factor)
        if sampler is not None:
            x = apply_levy_walk(x, sampler, rng, state.lower, state.upper)
        new[i] = x
    return new


def minimize(objective: Objective, config: MrfoConfig, *, executor=None, callback=None) -> OptimizeResult:
    """Minimize ``objective`` over the box in ``config``.

    Parameters
    ----------
    objective : callable
        Maps a position vector to a scalar. Non-finite values count as +inf.
    config : MrfoConfig
    executor : concurrent.futures.Executor, optional
        Used to evaluate the population of each phase.
    callback : callable, optional
        Called as ``callback(phase, state)`` after initialization
        (``"init"``) and after each evaluated phase (``"foraging"``,
        ``"somersault"``). Must not mutate the state.

    Returns
    -------
    OptimizeResult
        ``history[0]`` is the best fitness after initialization and
        ``history[t]`` the best after iteration ``t``.
    """
    rng = np.random.default_rng(config.seed)
    sampler = config.sampler() if config.levy else None
    state = initial_state(objective, config.population_size, config.lower, config.upper,
                          config.max_iterations, rng, executor)
    n_evals = config.population_size
    history = [state.best_fitness]
    if callback is not None:
        callback("init", state)

    for t in range(1, config.max_iterations + 1):
        state.iteration = t
        state.positions = foraging_phase(state, rng)
        state.fitnesses = evaluate(objective, state.positions, executor)
        state.update_best(state.positions, state.fitnesses)
        if callback is not None:
            callback("foraging", state)

        state.positions = somersault_phase(state, rng, config.somersault_factor, sampler)
        state.fitnesses = evaluate(objective, state.positions, executor)
        state.update_best(state.positions, state.fitnesses)
        if callback is not None:
            callback("somersault", state)

        n_evals += 2 * config.population_size
        history.append(state.best_fitness)

    logger.debug("mrfo finished: best %.6g after %d evaluations", state.best_fitness, n_evals)
    return OptimizeResult(state.best_position.copy(), state.best_fitness, np.array(history), n_evals, state)
