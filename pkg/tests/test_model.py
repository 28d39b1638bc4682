import itertools
import math
from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqvqe.errors import InvalidModelError, ResourceLimitError
from seqvqe.model import (
    PAULI,
    IsingModel,
    PauliTerm,
    build_ring_hamiltonian,
    classical_ground_energy,
    exact_spectrum,
    ground_energy,
    hamiltonian_matrix,
    term_expectation_matrix,
)


def dense_reference(model: IsingModel) -> np.ndarray:
    """Kronecker-product construction, independent of the bit tricks."""
    m = model.spins
    h = np.zeros((2**m, 2**m), dtype=complex)
    for t in model.terms:
        ops = [PAULI[t.operator_at(i)] for i in range(m)]
        h += t.coefficient * reduce(np.kron, ops)
    return h


def test_ring_m3_terms():
    model = build_ring_hamiltonian(3, 0.5)
    zz = [t for t in model.terms if t.operators == ("Z", "Z")]
    xs = [t for t in model.terms if t.operators == ("X",)]
    assert len(zz) == 3 and all(t.coefficient == 1.0 for t in zz)
    assert len(xs) == 3 and all(t.coefficient == 0.5 for t in xs)


def test_two_spin_ring_counts_bond_once():
    model = build_ring_hamiltonian(2, 0.0)
    assert model.bonds == [(0, 1)]
    xs = [t for t in model.terms if t.operators == ("X",)]
    assert len(xs) == 2 and all(t.coefficient == 0.0 for t in xs)


def test_ring_topology_m4():
    model = build_ring_hamiltonian(4, 1.0)
    assert sorted(model.bonds) == [(0, 1), (0, 3), (1, 2), (2, 3)]
    # deterministic ordering: bonds in ring order, then fields by site
    assert [t.sites for t in model.terms] == [(0, 1), (1, 2), (2, 3), (0, 3), (0,), (1,), (2,), (3,)]


@pytest.mark.parametrize("spins", [1, 0, -3])
def test_too_few_spins(spins):
    with pytest.raises(InvalidModelError):
        build_ring_hamiltonian(spins, 0.3)


def test_non_finite_field():
    with pytest.raises(InvalidModelError):
        build_ring_hamiltonian(3, math.inf)


@pytest.mark.parametrize(
    "coefficient, factors",
    [
        (1.0, ()),
        (math.nan, ((0, "Z"),)),
        (1.0, ((1, "Z"), (0, "Z"))),
        (1.0, ((0, "Z"), (0, "X"))),
        (1.0, ((0, "W"),)),
    ],
)
def test_pauli_term_invariants(coefficient, factors):
    with pytest.raises(InvalidModelError):
        PauliTerm(coefficient, factors)


def test_exact_two_spin_half_field():
    assert ground_energy(2, 0.5) == pytest.approx(-math.sqrt(2), abs=1e-12)


@pytest.mark.parametrize("spins, expected", [(4, -4.0), (3, -1.0)])
def test_exact_zero_field(spins, expected):
    assert exact_spectrum(build_ring_hamiltonian(spins, 0.0)).ground_energy == pytest.approx(expected, abs=1e-12)


def test_spectrum_sorted_and_degeneracy():
    spec = exact_spectrum(build_ring_hamiltonian(4, 0.0))
    assert np.all(np.diff(spec.eigenvalues) >= 0)
    assert spec.ground_energy == spec.eigenvalues[0]
    # the two Neel states
    assert spec.ground_degeneracy == 2


def test_exact_spectrum_size_cap():
    with pytest.raises(ResourceLimitError):
        exact_spectrum(build_ring_hamiltonian(15, 0.1))


@pytest.mark.parametrize("spins, expected", [(2, -1), (6, -6), (5, -3)])
def test_classical_enumeration(spins, expected):
    assert classical_ground_energy(spins) == expected


def test_classical_matches_itertools_enumeration():
    for m in range(3, 9):
        best = min(
            sum(s[i] * s[(i + 1) % m] for i in range(m)) for s in itertools.product((1, -1), repeat=m)
        )
        assert classical_ground_energy(m) == best


def test_term_matrices():
    assert np.allclose(term_expectation_matrix(PauliTerm(1.0, ((0, "Z"),)), 1), np.diag([1, -1]))
    zz = term_expectation_matrix(PauliTerm(1.0, ((0, "Z"), (1, "Z"))), 2)
    assert np.allclose(zz, np.diag([1, -1, -1, 1]))
    x0 = term_expectation_matrix(PauliTerm(1.0, ((0, "X"),)), 2)
    assert np.allclose(x0, np.kron(PAULI["X"], np.eye(2)))


def test_term_matrix_site_out_of_range():
    with pytest.raises(IndexError):
        term_expectation_matrix(PauliTerm(1.0, ((2, "Z"),)), 2)


@pytest.mark.parametrize("spins", [2, 3, 4, 5])
def test_fast_matrix_matches_kronecker(spins):
    model = build_ring_hamiltonian(spins, 0.7)
    assert np.allclose(hamiltonian_matrix(model), dense_reference(model), atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 7), st.floats(-3, 3, allow_nan=False))
def test_spin_flip_symmetry(spins, j):
    h = hamiltonian_matrix(build_ring_hamiltonian(spins, j))
    parity = reduce(np.kron, [PAULI["X"].real] * spins)
    assert np.max(np.abs(h @ parity - parity @ h)) <= 1e-12
    assert np.allclose(h, h.T)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 8), st.floats(-3, 3, allow_nan=False))
def test_field_sign_symmetry(spins, j):
    a = exact_spectrum(build_ring_hamiltonian(spins, j)).eigenvalues
    b = exact_spectrum(build_ring_hamiltonian(spins, -j)).eigenvalues
    assert np.max(np.abs(a - b)) <= 1e-10


@settings(max_examples=20, deadline=None)
@given(st.integers(3, 8), st.floats(0, 2, allow_nan=False), st.integers(1, 7))
def test_cyclic_relabeling(spins, j, shift):
    model = build_ring_hamiltonian(spins, j)
    e1 = exact_spectrum(model).ground_energy
    e2 = exact_spectrum(model.relabeled(shift)).ground_energy
    assert abs(e1 - e2) <= 1e-10


def test_zero_field_matches_enumeration_up_to_12():
    for m in range(2, 13):
        assert exact_spectrum(build_ring_hamiltonian(m, 0.0)).ground_energy == pytest.approx(
            classical_ground_energy(m), abs=1e-10
        )


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 5), st.floats(-2, 2, allow_nan=False), st.integers(0, 2**31 - 1))
def test_variational_bound_random_density_matrix(spins, j, seed):
    rng = np.random.default_rng(seed)
    dim = 2**spins
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    model = build_ring_hamiltonian(spins, j)
    energy = np.trace(hamiltonian_matrix(model) @ rho).real
    assert energy >= exact_spectrum(model).ground_energy - 1e-10


@pytest.mark.parametrize("spins, j", [(2, 0.3), (5, -1.1), (8, 0.9)])
def test_sector_spectrum_matches_dense(spins, j):
    model = build_ring_hamiltonian(spins, j)
    dense = np.linalg.eigvalsh(dense_reference(model))
    assert np.allclose(exact_spectrum(model).eigenvalues, dense, atol=1e-10)


def test_symmetry_breaking_term_uses_full_matrix():
    base = build_ring_hamiltonian(3, 0.4)
    model = IsingModel(3, 0.4, base.terms + (PauliTerm(0.3, ((1, "Z"),)),))
    dense = np.linalg.eigvalsh(dense_reference(model))
    assert np.allclose(exact_spectrum(model).eigenvalues, dense, atol=1e-10)
