"""Zero-noise extrapolation over the transmon noise scale ``c``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, SingularSystemError, UnderdeterminedFitError


@dataclass(frozen=True)
class NoisePoint:
    c: float
    energy: float
    stderr: float = 0.0

    def __post_init__(self):
        if not self.c >= 0:
            raise DomainError(f"noise scale must be >= 0, got {self.c}")
        if not self.stderr >= 0:
            raise DomainError("stderr must be >= 0")


@dataclass(frozen=True)
class ExtrapolationResult:
    """Zero-noise estimate.

    ``weights`` are the linear coefficients applied to the input energies,
    ``coefficients`` the polynomial in ``c`` (ascending powers).
    """

    e_star: float
    order: int
    weights: tuple[float, ...]
    coefficients: tuple[float, ...]
    stderr: float
    nodes: tuple[float, ...]

    @property
    def value(self) -> float:
        return self.e_star


def _check_nodes(nodes: Sequence[float]) -> np.ndarray:
    c = np.asarray(nodes, dtype=float)
    if c.ndim != 1 or len(c) < 2:
        raise DomainError("need at least two noise scales")
    if len(np.unique(c)) != len(c):
        raise SingularSystemError(f"duplicate noise scales {list(c)}")
    return c


def richardson_weights(nodes: Sequence[float]) -> np.ndarray:
    """Weights with sum 1 that cancel c^1 ... c^(n-1)."""
    c = _check_nodes(nodes)
    if np.any(c <= 0):
        raise DomainError("Richardson nodes must be positive")
    n = len(c)
    vander = np.vander(c, n, increasing=True).T  # row k holds c_i^k
    rhs = np.zeros(n)
    rhs[0] = 1.0
    try:
        return np.linalg.solve(vander, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc


def richardson_extrapolate(points: Sequence[NoisePoint]) -> ExtrapolationResult:
    nodes = [p.c for p in points]
    w = richardson_weights(nodes)
    energies = np.array([p.energy for p in points])
    errs = np.array([p.stderr for p in points])
    n = len(points)
    coeffs = np.linalg.solve(np.vander(np.asarray(nodes), n, increasing=True), energies)
    return ExtrapolationResult(
        e_star=float(w @ energies),
        order=n - 1,
        weights=tuple(float(x) for x in w),
        coefficients=tuple(float(x) for x in coeffs),
        stderr=float(math.sqrt(np.sum((w * errs) ** 2))),
        nodes=tuple(float(x) for x in nodes),
    )


def extrapolate_first_order(p1: NoisePoint, p2: NoisePoint) -> ExtrapolationResult:
    """Two-point linear extrapolation to c = 0."""
    if p2.c == p1.c:
        raise DomainError("the two noise scales must differ")
    if p2.c < p1.c:
        p1, p2 = p2, p1
    span = p2.c - p1.c
    g1, g2 = p2.c / span, -p1.c / span
    slope = (p2.energy - p1.energy) / span
    return ExtrapolationResult(
        e_star=g1 * p1.energy + g2 * p2.energy,
        order=1,
        weights=(g1, g2),
        coefficients=(p1.energy - slope * p1.c, slope),
        stderr=math.hypot(g1 * p1.stderr, g2 * p2.stderr),
        nodes=(p1.c, p2.c),
    )


def extrapolate_polynomial(points: Sequence[NoisePoint], degree: int) -> ExtrapolationResult:
    """Least-squares polynomial in c evaluated at c = 0.

    Points are weighted by 1/stderr^2 when every stderr is positive,
    uniformly otherwise. The reported stderr propagates the input stderrs
    through the linear estimator, which equals the fit covariance in the
    weighted case.
    """
    if degree < 0:
        raise DomainError("degree must be non-negative")
    if len(points) < degree + 1:
        raise UnderdeterminedFitError(
            f"degree {degree} needs at least {degree + 1} points, got {len(points)}"
        )
    c = _check_nodes([p.c for p in points]) if len(points) > 1 else np.array([points[0].c])
    y = np.array([p.energy for p in points])
    errs = np.array([p.stderr for p in points])
    w = 1.0 / errs**2 if np.all(errs > 0) else np.ones(len(points))
    a = np.vander(c, degree + 1, increasing=True)
    normal = a.T @ (w[:, None] * a)
    try:
        hat = np.linalg.solve(normal, a.T * w[None, :])  # rows map energies to coefficients
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc
    coeffs = hat @ y
    lin = hat[0]
    return ExtrapolationResult(
        e_star=float(coeffs[0]),
        order=degree,
        weights=tuple(float(x) for x in lin),
        coefficients=tuple(float(x) for x in coeffs),
        stderr=float(math.sqrt(np.sum((lin * errs) ** 2))),
        nodes=tuple(float(x) for x in c),
    )
