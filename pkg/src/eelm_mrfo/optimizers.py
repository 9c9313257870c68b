"""Baseline minimizers (PSO, GA, WOA, random search) behind one interface with MRFO.

Every optimizer returns an :class:`~eelm_mrfo.swarm.OptimizeResult` whose
history starts with the best fitness of the initial population and has
exactly one extra entry per iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import mrfo
from .swarm import Objective, OptimizeResult, SwarmState, as_bounds, evaluate, initial_state

KINDS = ("mrfo", "mrfoLevy", "pso", "ga", "woa", "randomSearch")

DEFAULT_PARAMS = {
    "mrfo": {"somersault_factor": 2.0},
    "mrfoLevy": {"somersault_factor": 2.0, "levy_exponent": 1.5, "levy_scale": None},
    "pso": {"inertia": 0.729, "cognitive": 1.49445, "social": 1.49445, "velocity_clamp": 0.5},
    "ga": {"crossover_rate": 0.9, "mutation_rate": 0.1, "mutation_scale": 0.1,
           "tournament_size": 3, "blend_alpha": 0.5, "elitism": 1},
    "woa": {"spiral_b": 1.0},
    "randomSearch": {},
}

_RATE_PARAMS = ("crossover_rate", "mutation_rate")


@dataclass(frozen=True)
class OptimizerSpec:
    """Which optimizer to run and how.

    ``lower`` and ``upper`` may be scalars (applied to every coordinate) or
    vectors. ``params`` overrides the kind-specific defaults in
    :data:`DEFAULT_PARAMS`.
    """

    kind: str = "mrfoLevy"
    population_size: int = 20
    max_iterations: int = 50
    lower: float | np.ndarray = -1.0
    upper: float | np.ndarray = 1.0
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown optimizer kind {self.kind!r}; expected one of {KINDS}")
        if self.population_size < 1:
            raise ValueError("population_size must be positive")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be nonnegative")
        unknown = set(self.params) - set(DEFAULT_PARAMS[self.kind])
        if unknown:
            raise ValueError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        merged = self.resolved_params()
        for name in _RATE_PARAMS:
            if name in merged and not 0 <= merged[name] <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {merged[name]}")
        if self.kind == "ga" and merged["tournament_size"] < 1:
            raise ValueError("tournament_size must be positive")

    def resolved_params(self) -> dict:
        return {**DEFAULT_PARAMS[self.kind], **self.params}

    def evaluations_per_iteration(self) -> int:
        return 2 * self.population_size if self.kind in ("mrfo", "mrfoLevy") else self.population_size

    def with_budget(self, evaluations: int) -> "OptimizerSpec":
        """Copy of this spec whose iteration count spends about ``evaluations`` objective calls."""
        per_iter = self.evaluations_per_iteration()
        iterations = max(0, (evaluations - self.population_size) // per_iter)
        return replace(self, max_iterations=int(iterations))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "population_size": self.population_size,
            "max_iterations": self.max_iterations,
            "lower": np.asarray(self.lower, dtype=float).tolist(),
            "upper": np.asarray(self.upper, dtype=float).tolist(),
            "seed": self.seed,
            "params": self.resolved_params(),
        }


def minimize_with(spec: OptimizerSpec, objective: Objective, dimension: int, *,
                  executor=None, callback=None) -> OptimizeResult:
    """Run the optimizer described by ``spec`` on ``objective`` over ``dimension`` coordinates."""
    lower, upper = as_bounds(spec.lower, spec.upper, dimension)
    params = spec.resolved_params()
    if spec.kind in ("mrfo", "mrfoLevy"):
        config = mrfo.MrfoConfig(
            lower, upper,
            population_size=spec.population_size,
            max_iterations=spec.max_iterations,
            somersault_factor=params["somersault_factor"],
            levy=spec.kind == "mrfoLevy",
            levy_exponent=params.get("levy_exponent", 1.5),
            levy_scale=params.get("levy_scale"),
            seed=spec.seed,
        )
        return mrfo.minimize(objective, config, executor=executor, callback=callback)
    runner = {"pso": _pso, "ga": _ga, "woa": _woa, "randomSearch": _random_search}[spec.kind]
    rng = np.random.default_rng(spec.seed)
    state = initial_state(objective, spec.population_size, lower, upper, spec.max_iterations, rng, executor)
    if callback is not None:
        callback("init", state)
    return runner(objective, spec, params, state, rng, executor, callback)


def _finish(state: SwarmState, history: list, n_evals: int) -> OptimizeResult:
    return OptimizeResult(state.best_position.copy(), state.best_fitness, np.array(history), n_evals, state)


def _pso(objective, spec, params, state, rng, executor, callback):
    n, dim = state.positions.shape
    vmax = params["velocity_clamp"] * (state.upper - state.lower)
    velocity = np.zeros((n, dim))
    pbest = state.positions.copy()
    pbest_fit = state.fitnesses.copy()
    history = [state.best_fitness]
    n_evals = n
    for t in range(1, spec.max_iterations + 1):
        state.iteration = t
        r1 = rng.random((n, dim))
        r2 = rng.random((n, dim))
        velocity = (params["inertia"] * velocity
                    + params["cognitive"] * r1 * (pbest - state.positions)
                    + params["social"] * r2 * (state.best_position - state.positions))
        velocity = np.clip(velocity, -vmax, vmax)
        state.positions = np.clip(state.positions + velocity, state.lower, state.upper)
        state.fitnesses = evaluate(objective, state.positions, executor)
        improved = state.fitnesses < pbest_fit
        pbest[improved] = state.positions[improved]
        pbest_fit[improved] = state.fitnesses[improved]
        state.update_best(state.positions, state.fitnesses)
        n_evals += n
        history.append(state.best_fitness)
        if callback is not None:
            callback("iteration", state)
    return _finish(state, history, n_evals)


def _tournament(fitnesses: np.ndarray, size: int, rng: np.random.Generator) -> int:
    contenders = rng.integers(0, fitnesses.shape[0], size=size)
    # first contender wins ties
    return int(contenders[np.argmin(fitnesses[contenders])])


def _ga(objective, spec, params, state, rng, executor, callback):
    n, dim = state.positions.shape
    width = state.upper - state.lower
    n_elite = min(int(params["elitism"]), n)
    history = [state.best_fitness]
    n_evals = n
    for t in range(1, spec.max_iterations + 1):
        state.iteration = t
        order = np.argsort(state.fitnesses, kind="stable")
        elite = state.positions[order[:n_elite]].copy()
        elite_fit = state.fitnesses[order[:n_elite]].copy()

        children = np.empty((n - n_elite, dim))
        for c in range(n - n_elite):
            p1 = state.positions[_tournament(state.fitnesses, params["tournament_size"], rng)]
            p2 = state.positions[_tournament(state.fitnesses, params["tournament_size"], rng)]
            if rng.random() < params["crossover_rate"]:
                # BLX-alpha: uniform in the parents' interval widened by alpha on each side
                lo = np.minimum(p1, p2)
                span = np.maximum(p1, p2) - lo
                a = params["blend_alpha"]
                child = lo - a * span + rng.random(dim) * (1 + 2 * a) * span
            else:
                child = p1.copy()
            mutate = rng.random(dim) < params["mutation_rate"]
            if mutate.any():
                child = child + mutate * rng.normal(0.0, 1.0, dim) * params["mutation_scale"] * width
            children[c] = np.clip(child, state.lower, state.upper)

        child_fit = evaluate(objective, children, executor)
        state.positions = np.vstack([elite, children])
        state.fitnesses = np.concatenate([elite_fit, child_fit])
        state.update_best(children, child_fit)
        n_evals += n - n_elite
        history.append(state.best_fitness)
        if callback is not None:
            callback("iteration", state)
    return _finish(state, history, n_evals)


def _woa(objective, spec, params, state, rng, executor, callback):
    n, dim = state.positions.shape
    b = params["spiral_b"]
    history = [state.best_fitness]
    n_evals = n
    T = max(spec.max_iterations, 1)
    for t in range(1, spec.max_iterations + 1):
        state.iteration = t
        a = 2.0 - 2.0 * (t - 1) / T
        new = np.empty_like(state.positions)
        for i in range(n):
            x = state.positions[i]
            A = 2.0 * a * rng.random() - a
            C = 2.0 * rng.random()
            p = rng.random()
            l = rng.uniform(-1.0, 1.0)
            if p < 0.5:
                if abs(A) < 1:
                    target = state.best_position
                else:
                    target = state.positions[rng.integers(0, n)]
                new[i] = target - A * np.abs(C * target - x)
            else:
                dist = np.abs(state.best_position - x)
                new[i] = dist * math.exp(b * l) * math.cos(2 * math.pi * l) + state.best_position
        state.positions = np.clip(new, state.lower, state.upper)
        state.fitnesses = evaluate(objective, state.positions, executor)
        state.update_best(state.positions, state.fitnesses)
        n_evals += n
        history.append(state.best_fitness)
        if callback is not None:
            callback("iteration", state)
    return _finish(state, history, n_evals)


def _random_search(objective, spec, params, state, rng, executor, callback):
    n, dim = state.positions.shape
    history = [state.best_fitness]
    n_evals = n
    for t in range(1, spec.max_iterations + 1):
        state.iteration = t
        state.positions = state.lower + rng.random((n, dim)) * (state.upper - state.lower)
        state.fitnesses = evaluate(objective, state.positions, executor)
        state.update_best(state.positions, state.fitnesses)
        n_evals += n
        history.append(state.best_fitness)
        if callback is not None:
            callback("iteration", state)
    return _finish(state, history, n_evals)
