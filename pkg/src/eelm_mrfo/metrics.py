"""Regression metrics."""

from __future__ import annotations

import math

import numpy as np


class DegenerateVarianceError(ValueError):
    """Targets are constant, so R^2 is undefined."""


def _pair(predictions, targets):
    p = np.asarray(predictions, dtype=float).ravel()
    t = np.asarray(targets, dtype=float).ravel()
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape[0]} predictions vs {t.shape[0]} targets")
    if p.size == 0:
        raise ValueError("metrics need at least one sample")
    return p, t


def rmse(predictions, targets) -> float:
    p, t = _pair(predictions, targets)
    return math.sqrt(float(np.mean((p - t) ** 2)))


def r_squared(predictions, targets) -> float:
    """Coefficient of determination ``1 - SS_res / SS_tot``."""
    p, t = _pair(predictions, targets)
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    if ss_tot == 0.0:
        raise DegenerateVarianceError("targets have zero variance; R^2 is undefined")
    return 1.0 - float(np.sum((t - p) ** 2)) / ss_tot
