"""Circular transverse-field Ising model and brute-force reference solvers.

The Hamiltonian is

    H = sum_<ij> Z_i Z_j + J sum_i X_i

on a ring of ``M`` spins. Sites are 0-based; site 0 is the first qubit
measured by the sequential circuit and site ``M - 1`` is the decoded
storage qubit. In dense matrices site 0 is the leftmost Kronecker factor.

For ``M = 2`` the single pair (0, 1) is counted once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import InvalidModelError, ResourceLimitError

MAX_DENSE_SPINS = 14
MAX_ENUMERATION_SPINS = 24

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class PauliTerm:
    """A real coefficient times a tensor product of single-site Paulis."""

    coefficient: float
    factors: tuple[tuple[int, str], ...]

    def __post_init__(self):
        factors = tuple((int(s), str(op).upper()) for s, op in self.factors)
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "coefficient", float(self.coefficient))
        if not factors:
            raise InvalidModelError("a Pauli term needs at least one factor")
        if not math.isfinite(self.coefficient):
            raise InvalidModelError(f"non-finite coefficient {self.coefficient}")
        sites = [s for s, _ in factors]
        if sites[0] < 0 or any(b <= a for a, b in zip(sites, sites[1:])):
            raise InvalidModelError(f"site indices must be strictly increasing: {sites}")
        for _, op in factors:
            if op not in ("X", "Y", "Z"):
                raise InvalidModelError(f"unknown Pauli operator {op!r}")

    @property
    def sites(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.factors)

    @property
    def operators(self) -> tuple[str, ...]:
        return tuple(op for _, op in self.factors)

    def operator_at(self, site: int) -> str:
        for s, op in self.factors:
            if s == site:
                return op
        return "I"

    def __str__(self):
        body = "".join(f"{op}{s}" for s, op in self.factors)
        return f"{self.coefficient:+g}*{body}"


@dataclass(frozen=True)
class IsingModel:
    spins: int
    field: float
    terms: tuple[PauliTerm, ...]

    @property
    def bonds(self) -> list[tuple[int, int]]:
        return [t.sites for t in self.terms if t.operators == ("Z", "Z")]

    def matrix(self) -> np.ndarray:
        """Dense real Hamiltonian matrix of size 2^M."""
        return hamiltonian_matrix(self)

    def relabeled(self, shift: int) -> "IsingModel":
        """Same model with every site ``i`` renamed to ``(i + shift) % M``."""
        m = self.spins
        terms = []
        for t in self.terms:
            factors = sorted(((s + shift) % m, op) for s, op in t.factors)
            terms.append(PauliTerm(t.coefficient, tuple(factors)))
        return IsingModel(m, self.field, tuple(terms))


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    ground_energy: float
    ground_degeneracy: int


def build_ring_hamiltonian(spins: int, field: float) -> IsingModel:
    """Ring Ising model with bonds (0,1), (1,2), ..., (M-1,0) then X terms."""
    if int(spins) != spins or spins < 2:
        raise InvalidModelError(f"need at least 2 spins, got {spins}")
    spins = int(spins)
    field = float(field)
    if not math.isfinite(field):
        raise InvalidModelError("transverse field must be finite")
    if spins == 2:
        bonds = [(0, 1)]
    else:
        bonds = [(i, (i + 1) % spins) for i in range(spins)]
    terms = [PauliTerm(1.0, tuple(sorted(((i, "Z"), (j, "Z"))))) for i, j in bonds]
    terms += [PauliTerm(field, ((i, "X"),)) for i in range(spins)]
    return IsingModel(spins, field, tuple(terms))


def term_expectation_matrix(term: PauliTerm, spins: int) -> np.ndarray:
    """Dense 2^M matrix of ``coefficient * P`` with identities off-support."""
    if spins > MAX_DENSE_SPINS:
        raise ResourceLimitError(f"dense matrices limited to {MAX_DENSE_SPINS} spins")
    if max(term.sites) >= spins:
        raise IndexError(f"term {term} references a site outside {spins} spins")
    factors = [PAULI[term.operator_at(i)] for i in range(spins)]
    return term.coefficient * reduce(np.kron, factors)


def _z_eigenvalues(spins: int) -> np.ndarray:
    """Array (2^M, M) of +-1 Z eigenvalues, site 0 as most significant bit."""
    idx = np.arange(2**spins)
    shifts = spins - 1 - np.arange(spins)
    bits = (idx[:, None] >> shifts[None, :]) & 1
    return 1 - 2 * bits


def hamiltonian_matrix(model: IsingModel) -> np.ndarray:
    m = model.spins
    if m > MAX_DENSE_SPINS:
        raise ResourceLimitError(f"dense diagonalization limited to {MAX_DENSE_SPINS} spins")
    dim = 2**m
    spins_z = _z_eigenvalues(m)
    h = np.zeros((dim, dim))
    diag = np.zeros(dim)
    idx = np.arange(dim)
    for term in model.terms:
        ops = term.operators
        if all(op == "Z" for op in ops):
            diag += term.coefficient * np.prod(spins_z[:, list(term.sites)], axis=1)
        elif all(op == "X" for op in ops):
            mask = 0
            for s in term.sites:
                mask |= 1 << (m - 1 - s)
            h[idx ^ mask, idx] += term.coefficient
        else:
            # mixed strings are rare here; fall back to the generic expansion
            h = h + term_expectation_matrix(term, m).real
    h[idx, idx] += diag
    return h


def _parity_blocks(model: IsingModel) -> list[np.ndarray] | None:
    """Spin-flip sectors of the Hamiltonian, or None if it breaks the symmetry.

    Swapping X and Z on every site (a global Hadamard) leaves the spectrum
    unchanged and turns the flip operator prod X into prod Z, whose sectors
    are simply the even- and odd-weight basis states.
    """
    for t in model.terms:
        if "Y" in t.operators or t.operators.count("Z") % 2:
            return None
    swap = {"X": "Z", "Z": "X"}
    rotated = IsingModel(
        model.spins,
        model.field,
        tuple(PauliTerm(t.coefficient, tuple((s, swap[op]) for s, op in t.factors)) for t in model.terms),
    )
    h = hamiltonian_matrix(rotated)
    weight = np.zeros(2**model.spins, dtype=int)
    for bit in range(model.spins):
        weight += (np.arange(2**model.spins) >> bit) & 1
    return [h[np.ix_(sel, sel)] for sel in (weight % 2 == 0, weight % 2 == 1)]


def exact_spectrum(model: IsingModel, degeneracy_tol: float = 1e-9) -> Spectrum:
    if model.spins > MAX_DENSE_SPINS:
        raise ResourceLimitError(
            f"exact_spectrum supports at most {MAX_DENSE_SPINS} spins, got {model.spins}"
        )
    blocks = _parity_blocks(model)
    if blocks is None:
        evals = np.linalg.eigvalsh(hamiltonian_matrix(model))
    else:
        evals = np.sort(np.concatenate([np.linalg.eigvalsh(b) for b in blocks]))
    ground = float(evals[0])
    degeneracy = int(np.sum(evals <= ground + degeneracy_tol))
    return Spectrum(evals, ground, degeneracy)


def ground_energy(spins: int, field: float) -> float:
    return exact_spectrum(build_ring_hamiltonian(spins, field)).ground_energy


def classical_ground_energy(spins: int) -> float:
    """Minimum ring bond energy over all 2^M classical configurations.

    Exhaustive enumeration, chunked to bound memory.
    """
    if int(spins) != spins or spins < 2 or spins > MAX_ENUMERATION_SPINS:
        raise InvalidModelError(
            f"enumeration supports 2..{MAX_ENUMERATION_SPINS} spins, got {spins}"
        )
    spins = int(spins)
    bonds: Sequence[tuple[int, int]]
    bonds = [(0, 1)] if spins == 2 else [(i, (i + 1) % spins) for i in range(spins)]
    best = math.inf
    chunk = 1 << min(spins, 18)
    shifts = spins - 1 - np.arange(spins)
    for start in range(0, 2**spins, chunk):
        idx = np.arange(start, min(start + chunk, 2**spins))
        s = 1 - 2 * ((idx[:, None] >> shifts[None, :]) & 1)
        energy = np.zeros(len(idx), dtype=np.int64)
        for i, j in bonds:
            energy += s[:, i] * s[:, j]
        best = min(best, int(energy.min()))
    return float(best)
