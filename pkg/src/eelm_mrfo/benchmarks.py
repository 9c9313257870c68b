"""Standard continuous test functions with their usual search domains."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


def sphere(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.dot(x, x))


def rastrigin(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(10.0 * x.size + np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x)))


def rosenbrock(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


@dataclass(frozen=True)
class BenchmarkFunction:
    name: str
    func: Callable[[np.ndarray], float]
    lower: float
    upper: float
    minimum: float = 0.0


FUNCTIONS = {
    "sphere": BenchmarkFunction("sphere", sphere, -5.12, 5.12),
    "rastrigin": BenchmarkFunction("rastrigin", rastrigin, -5.12, 5.12),
    "rosenbrock": BenchmarkFunction("rosenbrock", rosenbrock, -2.048, 2.048),
}


def get_function(name: str) -> BenchmarkFunction:
    try:
        return FUNCTIONS[name]
    except KeyError:
        raise KeyError(f"unknown test function {name!r}; expected one of {sorted(FUNCTIONS)}") from None
