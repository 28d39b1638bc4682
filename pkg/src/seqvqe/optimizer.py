"""Simultaneous perturbation stochastic approximation (SPSA).

Gains follow the usual schedule

    a_k = a / (A + k + 1)^alpha,   c_k = c0 / (k + 1)^gamma

with ``k`` counted from zero. The objective may return a float or any
object exposing ``.value``; the raw return values are kept in the trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import DomainError, SpsaAbort

Objective = Callable[[np.ndarray], Any]


@dataclass(frozen=True)
class SpsaConfig:
    a: float = 0.2
    c0: float = 0.1
    A: float = 50.0
    alpha: float = 0.602
    gamma: float = 0.101
    iterations: int = 500
    seed: int = 0
    smoothing_window: int = 10

    def __post_init__(self):
        if not (self.a > 0 and self.c0 > 0):
            raise DomainError("a and c0 must be positive")
        if self.A < 0:
            raise DomainError("A must be non-negative")
        if not 0 < self.gamma < self.alpha <= 1:
            raise DomainError("need 0 < gamma < alpha <= 1")
        if self.iterations < 1:
            raise DomainError("need at least one iteration")

    def gain_a(self, k: int) -> float:
        return self.a / (self.A + k + 1) ** self.alpha

    def gain_c(self, k: int) -> float:
        return self.c0 / (k + 1) ** self.gamma


@dataclass
class IterationRecord:
    index: int
    theta: np.ndarray
    delta: np.ndarray
    a_k: float
    c_k: float
    y_plus: Any
    y_minus: Any
    value_plus: float
    value_minus: float
    gradient: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def mitigated_plus(self):
        return getattr(self.y_plus, "extrapolation", None)

    @property
    def mitigated_minus(self):
        return getattr(self.y_minus, "extrapolation", None)


def objective_value(y) -> float:
    return float(getattr(y, "value", y))


def perturbation(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Rademacher vector of +-1 entries."""
    if dim < 1:
        raise DomainError("dimension must be >= 1")
    return 2.0 * rng.integers(0, 2, size=dim) - 1.0


def spsa_step(
    theta: np.ndarray,
    k: int,
    objective: Objective,
    cfg: SpsaConfig,
    rng: np.random.Generator,
) -> tuple[np.ndarray, IterationRecord]:
    theta = np.asarray(theta, dtype=float)
    a_k, c_k = cfg.gain_a(k), cfg.gain_c(k)
    delta = perturbation(theta.size, rng)
    y_plus = objective(theta + c_k * delta)
    y_minus = objective(theta - c_k * delta)
    v_plus, v_minus = objective_value(y_plus), objective_value(y_minus)
    record = IterationRecord(k + 1, theta.copy(), delta, a_k, c_k, y_plus, y_minus, v_plus, v_minus)
    if not (math.isfinite(v_plus) and math.isfinite(v_minus)):
        raise SpsaAbort(f"non-finite objective at iteration {k + 1}: {v_plus}, {v_minus}", record)
    grad = (v_plus - v_minus) / (2.0 * c_k * delta)
    record.gradient = grad
    return theta - a_k * grad, record


def smoothed_values(trace: list[IterationRecord], window: int = 10) -> np.ndarray:
    """Median of the last ``window`` evaluations up to each iteration."""
    values = []
    for rec in trace:
        values.extend((rec.value_plus, rec.value_minus))
    out = np.empty(len(trace))
    for i in range(len(trace)):
        end = 2 * (i + 1)
        out[i] = float(np.median(values[max(0, end - window) : end]))
    return out


def spsa_run(
    objective: Objective,
    theta0,
    cfg: SpsaConfig,
) -> tuple[np.ndarray, list[IterationRecord]]:
    """Run ``cfg.iterations`` steps; returns the best visited iterate and the trace.

    The best iterate minimises the running median of recent evaluations,
    which is robust against shot noise.
    """
    rng = np.random.default_rng(cfg.seed)
    theta = np.asarray(theta0, dtype=float).copy()
    trace: list[IterationRecord] = []
    for k in range(cfg.iterations):
        theta, record = spsa_step(theta, k, objective, cfg, rng)
        trace.append(record)
    smooth = smoothed_values(trace, cfg.smoothing_window)
    best = int(np.argmin(smooth))
    return trace[best].theta.copy(), trace


def calibrate_gain(
    objective: Objective,
    theta0,
    c0: float,
    A: float,
    alpha: float,
    target_step: float = 0.2,
    samples: int = 4,
    seed: int = 0,
) -> float:
    """Choose ``a`` so the first update moves each angle by at most ``target_step``.

    Every coordinate of an SPSA gradient estimate has magnitude
    |y+ - y-| / (2 c0); the largest over a few perturbations fixes the scale.
    """
    rng = np.random.default_rng(seed)
    theta0 = np.asarray(theta0, dtype=float)
    mags = []
    for _ in range(samples):
        delta = perturbation(theta0.size, rng)
        diff = objective_value(objective(theta0 + c0 * delta)) - objective_value(
            objective(theta0 - c0 * delta)
        )
        mags.append(abs(diff) / (2 * c0))
    g = float(np.max(mags))
    if not math.isfinite(g) or g <= 0:
        return target_step * (A + 1) ** alpha
    return target_step * (A + 1) ** alpha / g
