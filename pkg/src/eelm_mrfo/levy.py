"""Levy-flight steps via Mantegna's algorithm.

A step is ``s = u / |v| ** (1 / beta)`` with ``u ~ N(0, sigma_u**2)`` and
``v ~ N(0, 1)``; for ``0 < beta <= 2`` the tails of ``s`` decay like
``|s| ** -(1 + beta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_MIN_ABS_V = 1e-300


def mantegna_sigma(beta: float) -> float:
    """Standard deviation of the numerator normal for exponent ``beta``."""
    if not 0 < beta <= 2:
        raise ValueError(f"Levy exponent must lie in (0, 2], got {beta}")
    num = math.gamma(1 + beta) * math.sin(math.pi * beta / 2)
    den = math.gamma((1 + beta) / 2) * beta * 2 ** ((beta - 1) / 2)
    return (num / den) ** (1 / beta)


@dataclass(frozen=True)
class LevyStepSampler:
    exponent: float = 1.5
    scale: float | np.ndarray = 1.0
    sigma_mu: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "sigma_mu", mantegna_sigma(self.exponent))
        if np.any(np.asarray(self.scale) <= 0):
            raise ValueError("Levy step scale must be positive")


def levy_step(sampler: LevyStepSampler, dimension: int, rng: np.random.Generator, *, mu=None) -> np.ndarray:
    """Draw ``dimension`` independent Mantegna steps, multiplied by ``sampler.scale``.

    ``mu`` overrides the numerator draws (used to pin values in tests); the
    denominator draws are still consumed from ``rng``.
    """
    if mu is None:
        mu = rng.normal(0.0, sampler.sigma_mu, size=dimension)
    v = rng.normal(0.0, 1.0, size=dimension)
    tiny = np.abs(v) < _MIN_ABS_V
    while np.any(tiny):
        v[tiny] = rng.normal(0.0, 1.0, size=int(tiny.sum()))
        tiny = np.abs(v) < _MIN_ABS_V
    return np.asarray(mu, dtype=float) / np.abs(v) ** (1.0 / sampler.exponent) * sampler.scale


def apply_levy_walk(position, sampler: LevyStepSampler, rng: np.random.Generator,
                    lower, upper, *, mu=None, signs=None, step=None) -> np.ndarray:
    """Perturb ``position`` by ``mu * sign(rand - 1/2) * levy_step`` and clamp to the box.

    ``mu`` is one uniform draw per call; the sign is drawn per dimension.
    Any of ``mu``, ``signs`` or ``step`` may be supplied to pin that factor.
    """
    x = np.asarray(position, dtype=float)
    if mu is None:
        mu = rng.random()
    if signs is None:
        signs = np.sign(rng.random(x.shape[0]) - 0.5)
    if step is None:
        step = levy_step(sampler, x.shape[0], rng)
    return np.clip(x + mu * np.asarray(signs) * np.asarray(step), lower, upper)
