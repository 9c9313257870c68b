"""INI-style run configuration.

Grammar: ``[section]`` headers followed by ``key = value`` lines; ``#`` and
``;`` start comments; lists are comma separated. Recognised sections::

    [rdf]         cutoff, sigma, power, grid_points, grid_max,
                  pairs = Li-Li, Li-Ge, Ge-Ge
    [references]  <element> = <eV/atom>      (pure-phase energies)
    [dataset]     path = features.csv   or   synthetic = sinc1d|friedman1|linear
                  samples, noise, seed, rmse_scale, units, max_target
    [plan]        folds, runs, master_seed
    [model NAME]  hidden_nodes, activation, optimizer (none for plain ELM),
                  population, iterations, lower, upper, penalty,
                  penalty_grid, fitness_fraction, include_biases,
                  resolve_on_full, plus any optimizer parameter
                  (e.g. inertia, mutation_rate, levy_scale)
    [suite]       functions, dimensions, optimizers, seeds, iterations,
                  population, lower, upper

Model sections keep file order; that order is the report order.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .harness import FoldPlan, ModelEntry
from .optimizers import DEFAULT_PARAMS, KINDS, OptimizerSpec
from .rdf import RdfConfig
from .trainer import TrainingRunConfig


class ConfigError(ValueError):
    pass


def load(path=None, text: str | None = None) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str  # element symbols are case sensitive
    try:
        if path is not None:
            p = Path(path)
            if not p.is_file():
                raise ConfigError(f"config file not found: {p}")
            parser.read_string(p.read_text(), source=str(p))
        if text is not None:
            parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    return parser


def _list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def _num(value: str):
    value = value.strip()
    if value.lower() in ("none", ""):
        return None
    try:
        return int(value)
    except ValueError:
        return float(value)


def _section(parser, name) -> dict:
    return dict(parser[name]) if parser.has_section(name) else {}


def rdf_config(parser) -> RdfConfig:
    s = _section(parser, "rdf")
    kwargs = {}
    for key in ("cutoff", "sigma", "power", "grid_max"):
        if key in s:
            kwargs[key] = float(s[key])
    if "grid_points" in s:
        kwargs["grid_points"] = int(s["grid_points"])
    if "pairs" in s:
        pairs = []
        for item in _list(s["pairs"]):
            parts = item.split("-")
            if len(parts) != 2:
                raise ConfigError(f"species pair must look like A-B, got {item!r}")
            pairs.append(tuple(parts))
        kwargs["pairs"] = tuple(pairs)
    try:
        return RdfConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"[rdf] {exc}") from None


def references(parser) -> dict | None:
    s = _section(parser, "references")
    return {k: float(v) for k, v in s.items()} or None


def fold_plan(parser, seed: int | None = None, runs: int | None = None, folds: int | None = None) -> FoldPlan:
    s = _section(parser, "plan")
    try:
        return FoldPlan(
            fold_count=folds if folds is not None else int(s.get("folds", 5)),
            run_count=runs if runs is not None else int(s.get("runs", 20)),
            master_seed=seed if seed is not None else int(s.get("master_seed", 0)),
        )
    except ValueError as exc:
        raise ConfigError(f"[plan] {exc}") from None


_TRAINING_KEYS = {"hidden_nodes", "activation", "optimizer", "population", "iterations", "lower", "upper",
                  "penalty", "penalty_grid", "fitness_fraction", "include_biases", "resolve_on_full"}


def training_config(options: dict, defaults: TrainingRunConfig | None = None) -> TrainingRunConfig:
    base = defaults or TrainingRunConfig()
    kind = options.get("optimizer", base.optimizer.kind if base.optimizer else "none").strip()
    if kind.lower() == "none":
        optimizer = None
    elif kind not in KINDS:
        raise ConfigError(f"unknown optimizer {kind!r}; expected none or one of {KINDS}")
    else:
        params = {}
        for key, value in options.items():
            if key in _TRAINING_KEYS:
                continue
            if key not in DEFAULT_PARAMS[kind]:
                raise ConfigError(f"unknown model option {key!r} for optimizer {kind}")
            params[key] = _num(value)
        base_opt = base.optimizer or OptimizerSpec()
        try:
            optimizer = OptimizerSpec(
                kind=kind,
                population_size=int(options.get("population", base_opt.population_size)),
                max_iterations=int(options.get("iterations", base_opt.max_iterations)),
                lower=float(options.get("lower", base_opt.lower)),
                upper=float(options.get("upper", base_opt.upper)),
                params=params,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    try:
        return TrainingRunConfig(
            hidden_nodes=int(options.get("hidden_nodes", base.hidden_nodes)),
            activation=options.get("activation", base.activation).strip(),
            optimizer=optimizer,
            penalty=float(options.get("penalty", base.penalty)),
            penalty_grid=tuple(float(v) for v in _list(options.get("penalty_grid", ""))) or base.penalty_grid,
            fitness_fraction=float(options.get("fitness_fraction", base.fitness_fraction)),
            include_biases=_bool(options["include_biases"]) if "include_biases" in options else base.include_biases,
            resolve_on_full=_bool(options["resolve_on_full"]) if "resolve_on_full" in options else base.resolve_on_full,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def model_entries(parser) -> list[ModelEntry]:
    entries = []
    for name in parser.sections():
        if name.startswith("model "):
            label = name[len("model "):].strip()
            if not label:
                raise ConfigError("model section needs a name: [model NAME]")
            entries.append(ModelEntry(label, training_config(dict(parser[name]))))
    return entries


def default_models(hidden_nodes: int = 300) -> list[ModelEntry]:
    """Plain ELM, EELM-MRFO and EELM-MRFO-LF with the experiment defaults."""
    return [
        ModelEntry("ELM", TrainingRunConfig(hidden_nodes, optimizer=None)),
        ModelEntry("EELM-MRFO", TrainingRunConfig(hidden_nodes, optimizer=OptimizerSpec("mrfo"))),
        ModelEntry("EELM-MRFO-LF", TrainingRunConfig(hidden_nodes, optimizer=OptimizerSpec("mrfoLevy"))),
    ]


@dataclass
class DatasetSpec:
    path: str | None = None
    synthetic: str | None = "sinc1d"
    samples: int = 200
    noise: float = 0.05
    seed: int = 0
    rmse_scale: float | None = None
    units: str | None = None
    max_target: float | None = None


def dataset_spec(parser) -> DatasetSpec:
    s = _section(parser, "dataset")
    spec = DatasetSpec()
    if "path" in s:
        spec.path, spec.synthetic = s["path"], None
    if "synthetic" in s:
        spec.synthetic, spec.path = s["synthetic"].strip(), None
    for key, cast in (("samples", int), ("noise", float), ("seed", int), ("rmse_scale", float),
                      ("max_target", float)):
        if key in s:
            setattr(spec, key, cast(s[key]))
    if "units" in s:
        spec.units = s["units"]
    return spec


@dataclass
class SuiteSpec:
    functions: list = field(default_factory=lambda: ["sphere", "rastrigin", "rosenbrock"])
    dimensions: list = field(default_factory=lambda: [2, 10])
    optimizers: list = field(default_factory=lambda: ["mrfo", "mrfoLevy", "pso", "ga", "woa", "randomSearch"])
    seeds: int = 20
    iterations: int = 50
    population: int = 20
    lower: float | None = None
    upper: float | None = None


def suite_spec(parser) -> SuiteSpec:
    s = _section(parser, "suite")
    spec = SuiteSpec()
    if "functions" in s:
        spec.functions = _list(s["functions"])
    if "dimensions" in s:
        spec.dimensions = [int(v) for v in _list(s["dimensions"])]
    if "optimizers" in s:
        spec.optimizers = _list(s["optimizers"])
    for key in ("seeds", "iterations", "population"):
        if key in s:
            setattr(spec, key, int(s[key]))
    for key in ("lower", "upper"):
        if key in s:
            setattr(spec, key, float(s[key]))
    return spec
