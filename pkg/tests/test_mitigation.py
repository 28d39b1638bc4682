import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from seqvqe.ansatz import AnsatzCircuit
from seqvqe.errors import DomainError, SingularSystemError, UnderdeterminedFitError
from seqvqe.estimator import estimate_energy_exact
from seqvqe.mitigation import (
    NoisePoint,
    extrapolate_first_order,
    extrapolate_polynomial,
    richardson_extrapolate,
    richardson_weights,
)
from seqvqe.model import build_ring_hamiltonian, exact_spectrum
from seqvqe.noise import NoiseModel

GRID = (1.0, 1.2, 1.4, 1.6, 1.8, 2.0)
node_sets = st.lists(st.floats(0.1, 5.0), min_size=2, max_size=5, unique=True).filter(
    lambda xs: min(abs(a - b) for i, a in enumerate(xs) for b in xs[i + 1 :]) > 0.05
)


def test_weights_one_and_two_point_two():
    assert np.allclose(richardson_weights([1.0, 2.2]), [11 / 6, -5 / 6], atol=1e-12)
    assert np.allclose(richardson_weights([1.0, 2.0]), [2.0, -1.0], atol=1e-12)


def test_duplicate_nodes_are_singular():
    with pytest.raises(SingularSystemError):
        richardson_weights([1.0, 1.0])
    with pytest.raises(SingularSystemError):
        extrapolate_polynomial([NoisePoint(1.0, 0.0), NoisePoint(1.0, 1.0), NoisePoint(2.0, 0.0)], 1)
    # duplicates are a value error too, for callers that only catch those
    assert issubclass(SingularSystemError, ValueError)


def test_weights_need_positive_nodes():
    with pytest.raises(DomainError):
        richardson_weights([0.0, 1.0])
    with pytest.raises(DomainError):
        richardson_weights([1.0])


@settings(max_examples=50, deadline=None)
@given(node_sets)
def test_weights_sum_to_one(nodes):
    w = richardson_weights(nodes)
    assert abs(w.sum() - 1) <= 1e-12 * max(1.0, np.abs(w).max())


@settings(max_examples=50, deadline=None)
@given(node_sets, st.floats(-5, 5), st.floats(-5, 5))
def test_weights_exact_on_affine(nodes, a, b):
    w = richardson_weights(nodes)
    e = a + b * np.asarray(nodes)
    assert w @ e == pytest.approx(a, abs=1e-9 * max(1.0, np.abs(w).max()))


def test_richardson_cancels_through_order():
    nodes = [1.0, 1.5, 2.2]
    e = [3 - 2 * c + 0.7 * c**2 for c in nodes]
    res = richardson_extrapolate([NoisePoint(c, x) for c, x in zip(nodes, e)])
    assert res.e_star == pytest.approx(3.0, abs=1e-12)
    assert res.order == 2
    assert sum(res.weights) == pytest.approx(1.0, abs=1e-12)


def test_first_order_examples():
    res = extrapolate_first_order(NoisePoint(1.0, -3.0), NoisePoint(2.2, -2.4))
    assert res.e_star == pytest.approx(-3.5, abs=1e-12)
    flat = extrapolate_first_order(NoisePoint(1.0, -2.0), NoisePoint(2.2, -2.0))
    assert flat.e_star == pytest.approx(-2.0, abs=1e-12)


def test_first_order_stderr():
    res = extrapolate_first_order(NoisePoint(1.0, -3.0, 0.01), NoisePoint(2.2, -2.4, 0.01))
    assert res.stderr == pytest.approx(0.01 * math.hypot(11 / 6, 5 / 6), rel=1e-12)
    assert res.stderr == pytest.approx(0.0201, abs=1e-4)


def test_first_order_equal_scales():
    with pytest.raises(DomainError):
        extrapolate_first_order(NoisePoint(1.0, 0.0), NoisePoint(1.0, 1.0))


def test_first_order_accepts_swapped_order():
    a = extrapolate_first_order(NoisePoint(2.2, -2.4), NoisePoint(1.0, -3.0))
    assert a.e_star == pytest.approx(-3.5)
    assert a.nodes == (1.0, 2.2)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 3), st.floats(0.1, 3), st.floats(-5, 5), st.floats(-5, 5))
def test_first_order_exact_on_affine(c1, c2, a, b):
    assume(abs(c1 - c2) > 0.05)
    res = extrapolate_first_order(NoisePoint(c1, a + b * c1), NoisePoint(c2, a + b * c2))
    assert res.e_star == pytest.approx(a, abs=1e-9 * (1 + abs(b)) * max(c1, c2) / abs(c1 - c2))


def test_quadratic_exactness():
    points = [NoisePoint(c, 2 - c + 0.5 * c**2) for c in GRID]
    assert extrapolate_polynomial(points, 2).e_star == pytest.approx(2.0, abs=1e-10)


def test_linear_fit_is_biased_on_quadratic():
    points = [NoisePoint(c, 2 - c + 0.5 * c**2) for c in GRID]
    assert abs(extrapolate_polynomial(points, 1).e_star - 2.0) > 0.05


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 3), st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_polynomial_exact_on_lower_degree(degree, coeffs):
    points = [NoisePoint(c, float(np.polyval(coeffs[: degree + 1][::-1], c))) for c in GRID]
    res = extrapolate_polynomial(points, 3)
    assert res.e_star == pytest.approx(coeffs[0], abs=1e-8)


def test_weighted_fit_matches_numpy_polyfit():
    rng = np.random.default_rng(3)
    errs = rng.uniform(0.005, 0.03, len(GRID))
    energies = -3 + 0.4 * np.asarray(GRID) - 0.05 * np.asarray(GRID) ** 2 + rng.normal(0, errs)
    points = [NoisePoint(c, e, s) for c, e, s in zip(GRID, energies, errs)]
    res = extrapolate_polynomial(points, 2)
    coef, cov = np.polyfit(GRID, energies, 2, w=1 / errs, cov="unscaled")
    assert res.e_star == pytest.approx(coef[-1], abs=1e-10)
    assert res.stderr == pytest.approx(math.sqrt(cov[-1, -1]), rel=1e-8)


def test_unweighted_when_any_stderr_is_zero():
    energies = [0.1, -0.3, 0.2, 0.0, 0.4, -0.1]
    errs = [0.0, 0.1, 0.1, 0.1, 0.1, 0.1]
    res = extrapolate_polynomial([NoisePoint(c, e, s) for c, e, s in zip(GRID, energies, errs)], 1)
    assert res.e_star == pytest.approx(np.polyfit(GRID, energies, 1)[-1], abs=1e-12)


def test_underdetermined_fit():
    with pytest.raises(UnderdeterminedFitError):
        extrapolate_polynomial([NoisePoint(1.0, 0.0), NoisePoint(2.0, 1.0)], 2)
    assert issubclass(UnderdeterminedFitError, ValueError)


def test_noise_point_validation():
    with pytest.raises(DomainError):
        NoisePoint(-0.1, 0.0)
    with pytest.raises(DomainError):
        NoisePoint(1.0, 0.0, -1e-3)


@settings(max_examples=30, deadline=None)
@given(st.floats(-4, 4).filter(lambda s: abs(s) > 1e-3), st.integers(0, 2**31 - 1))
def test_linearity_in_energies(scale, seed):
    rng = np.random.default_rng(seed)
    e = rng.normal(size=len(GRID))
    base = [NoisePoint(c, x) for c, x in zip(GRID, e)]
    scaled = [NoisePoint(c, scale * x) for c, x in zip(GRID, e)]
    for fit in (lambda p: extrapolate_polynomial(p, 2), lambda p: extrapolate_first_order(p[0], p[-1])):
        assert fit(scaled).e_star == pytest.approx(scale * fit(base).e_star, abs=1e-9)


def test_overshoot_below_ground_is_allowed():
    e0 = exact_spectrum(build_ring_hamiltonian(4, 0.5)).ground_energy
    res = extrapolate_first_order(NoisePoint(1.0, e0 + 0.05), NoisePoint(2.2, e0 + 0.5))
    assert res.e_star < e0


def test_second_order_beats_first_on_simulated_curve():
    ising = build_ring_hamiltonian(3, 0.5)
    rng = np.random.default_rng(0)
    circuit = AnsatzCircuit.create(2, rng.uniform(-1, 1, 14))
    energy = lambda c: estimate_energy_exact(circuit, None, NoiseModel(scale=c), ising).mean  # noqa: E731
    target = energy(0.0)
    points = [NoisePoint(c, energy(c)) for c in GRID]
    second = extrapolate_polynomial(points, 2).e_star
    first = extrapolate_polynomial(points, 1).e_star
    assert abs(second - target) < abs(first - target)
