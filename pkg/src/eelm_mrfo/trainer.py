"""Evolutionary ELM training: a swarm searches hidden-layer parameters,
each candidate's output weights come from a least-squares solve, and the
candidate's fitness is its RMSE on held-out data.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .elm import ElmModel, RegressionData, build_hidden_matrix, fit_output_weights, random_model, solve_output_weights
from .metrics import rmse
from .optimizers import OptimizerSpec, minimize_with


@dataclass(frozen=True)
class AgentEncoding:
    """Flat layout of hidden-layer parameters inside an agent vector.

    The first ``M * N`` entries are the input weights, row by row (one row
    per hidden node); when ``include_biases`` is set the ``M`` hidden biases
    follow.
    """

    n_inputs: int
    n_hidden: int
    include_biases: bool = True

    @property
    def size(self) -> int:
        return self.n_hidden * self.n_inputs + (self.n_hidden if self.include_biases else 0)

    def encode(self, model: ElmModel) -> np.ndarray:
        if (model.n_hidden, model.n_inputs) != (self.n_hidden, self.n_inputs):
            raise ValueError(f"model is {model.n_hidden}x{model.n_inputs}, layout expects "
                             f"{self.n_hidden}x{self.n_inputs}")
        parts = [model.input_weights.ravel()]
        if self.include_biases:
            parts.append(model.hidden_biases)
        return np.concatenate(parts)

    def decode(self, vector, activation: str = "sigmoid") -> ElmModel:
        v = np.asarray(vector, dtype=float)
        if v.shape != (self.size,):
            raise ValueError(f"agent vector has shape {v.shape}, expected ({self.size},)")
        n_w = self.n_hidden * self.n_inputs
        weights = v[:n_w].reshape(self.n_hidden, self.n_inputs)
        biases = v[n_w:] if self.include_biases else np.zeros(self.n_hidden)
        return ElmModel(weights, biases, None, activation)


def agent_fitness(vector, encoding: AgentEncoding, solve_split: RegressionData, fit_split: RegressionData,
                  penalty: float = 0.0, activation: str = "sigmoid") -> float:
    """RMSE on ``fit_split`` of the network whose output weights were solved on ``solve_split``.

    Any numerical failure gives +inf so the agent can never become best.
    """
    try:
        model = encoding.decode(vector, activation)
        beta = solve_output_weights(build_hidden_matrix(model, solve_split.inputs), solve_split.targets, penalty)
        pred = build_hidden_matrix(model, fit_split.inputs) @ beta
        value = rmse(pred, fit_split.targets)
    except (ValueError, np.linalg.LinAlgError, FloatingPointError):
        return math.inf
    return value if math.isfinite(value) else math.inf


class _Fitness:
    """Picklable objective wrapper so evaluation can go through a process pool."""

    def __init__(self, encoding, solve_split, fit_split, penalty, activation):
        self.encoding = encoding
        self.solve_split = solve_split
        self.fit_split = fit_split
        self.penalty = penalty
        self.activation = activation

    def __call__(self, vector) -> float:
        return agent_fitness(vector, self.encoding, self.solve_split, self.fit_split, self.penalty, self.activation)


@dataclass(frozen=True)
class TrainingRunConfig:
    """Settings for one evolutionary (or plain) ELM training run.

    ``optimizer`` of None trains a plain ELM: one random hidden layer and a
    single solve. ``penalty_grid``, when non-empty, picks the ridge penalty
    for the final solve by fitness-split RMSE.
    """

    hidden_nodes: int = 300
    activation: str = "sigmoid"
    optimizer: OptimizerSpec | None = field(default_factory=OptimizerSpec)
    penalty: float = 0.0
    penalty_grid: tuple = ()
    fitness_fraction: float = 0.2
    include_biases: bool = True
    resolve_on_full: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.hidden_nodes < 1:
            raise ValueError("hidden_nodes must be positive")
        if not 0 < self.fitness_fraction < 1:
            raise ValueError("fitness_fraction must lie in (0, 1)")
        if self.penalty < 0 or any(p < 0 for p in self.penalty_grid):
            raise ValueError("penalties must be nonnegative")
        object.__setattr__(self, "penalty_grid", tuple(float(p) for p in self.penalty_grid))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["optimizer"] = None if self.optimizer is None else self.optimizer.to_dict()
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class RunManifest:
    """Reproducibility record of one training run.

    ``volatile`` holds values (such as wall-clock time) that legitimately
    differ between identical runs; everything else is deterministic.
    """

    config: dict
    config_hash: str
    seed: int
    history: list
    best_fitness: float | None = None
    penalty: float = 0.0
    labels: dict = field(default_factory=dict)
    volatile: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            **self.labels,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "best_fitness": self.best_fitness,
            "penalty": self.penalty,
            "history": list(self.history),
            "config": self.config,
            "volatile": self.volatile,
        }


def split_for_fitness(data: RegressionData, fraction: float, rng: np.random.Generator):
    """Shuffle and cut ``data`` into a solve split and a fitness split."""
    n = data.n_samples
    if n < 2:
        return data, data
    n_fit = min(max(1, int(round(fraction * n))), n - 1)
    perm = rng.permutation(n)
    return data.subset(perm[n_fit:]), data.subset(perm[:n_fit])


def train_plain_elm(data: RegressionData, hidden_nodes: int, activation: str = "sigmoid",
                    penalty: float = 0.0, seed: int = 0) -> ElmModel:
    """Random hidden layer in [-1, 1] and one least-squares solve."""
    rng = np.random.default_rng(seed)
    model = random_model(data.n_features, hidden_nodes, rng, activation)
    return fit_output_weights(model, data, penalty)


def _choose_penalty(model: ElmModel, solve_split: RegressionData, fit_split: RegressionData,
                    grid: tuple, default: float) -> float:
    if not grid:
        return default
    scores = []
    for p in grid:
        try:
            fitted = fit_output_weights(model, solve_split, p)
            scores.append(rmse(build_hidden_matrix(fitted, fit_split.inputs) @ fitted.output_weights,
                               fit_split.targets))
        except (ValueError, np.linalg.LinAlgError):
            scores.append(math.inf)
    return grid[int(np.argmin(scores))]


def train(data: RegressionData, config: TrainingRunConfig, *, executor=None) -> tuple[ElmModel, RunManifest]:
    """Train an ELM as described by ``config``.

    With an optimizer the training data is split once into a solve split
    and a fitness split. The swarm minimizes fitness-split RMSE over the
    hidden parameters, and the winner's output weights are then re-solved
    on all of ``data`` (or on the solve split when ``resolve_on_full`` is
    False).
    """
    manifest = RunManifest(config.to_dict(), config.digest(), config.seed, [])
    if config.optimizer is None:
        model = train_plain_elm(data, config.hidden_nodes, config.activation, config.penalty, config.seed)
        manifest.penalty = config.penalty
        return model, manifest

    seeds = np.random.SeedSequence(config.seed).generate_state(2)
    rng = np.random.default_rng(int(seeds[0]))
    solve_split, fit_split = split_for_fitness(data, config.fitness_fraction, rng)
    encoding = AgentEncoding(data.n_features, config.hidden_nodes, config.include_biases)
    objective = _Fitness(encoding, solve_split, fit_split, config.penalty, config.activation)
    spec = replace(config.optimizer, seed=int(seeds[1]))
    result = minimize_with(spec, objective, encoding.size, executor=executor)

    hidden = encoding.decode(result.best_position, config.activation)
    penalty = _choose_penalty(hidden, solve_split, fit_split, config.penalty_grid, config.penalty)
    final_data = data if config.resolve_on_full else solve_split
    model = fit_output_weights(hidden, final_data, penalty)

    manifest.history = [float(h) for h in result.history]
    manifest.best_fitness = float(result.best_fitness)
    manifest.penalty = penalty
    return model, manifest
