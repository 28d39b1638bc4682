"""Energy estimation for the sequential circuit under gate-level noise.

Two routes:

* exact contraction, threading the 4x4 density matrix of S (x) Q through
  the schedule. At each measurement the operator is optionally weighted by
  Z on Q, then Q is traced out and re-prepared in its reset state;
* Monte-Carlo sampling of measurement records with projection onto each
  outcome.

Both are organised around per-site transfer maps on the storage qubit:
linear maps ``T_w(rho_S) = Tr_Q[(I (x) W) L(rho_S (x) rho_reset)]`` where
``L`` is the noisy segment between two resets and ``W`` is I, Z or one of
the outcome projectors. Measured bit 0 (|g>) maps to eigenvalue +1.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .ansatz import MEASURE_RESET, AnsatzCircuit, GateEvent, basis_change_event, gate_schedule, kron
from .errors import DomainError, UnsupportedBasisError
from .model import IsingModel, PauliTerm
from .noise import NoiseModel, apply_idle, gate_noise_channel

SAMPLE_BLOCK = 1024

_W = {
    "I": np.eye(2, dtype=complex),
    "Z": np.diag([1.0, -1.0]).astype(complex),
    "0": np.diag([1.0, 0.0]).astype(complex),
    "1": np.diag([0.0, 1.0]).astype(complex),
}
_RHO_S0 = np.array([1.0, 0.0, 0.0, 0.0], dtype=complex)  # vec |0><0|
_TRACE_S = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex)


@dataclass
class JointState:
    """Density matrix (or weighted operator) on S (x) Q."""

    matrix: np.ndarray

    def validate(self, atol: float = 1e-12, psd_tol: float = 1e-10) -> None:
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > atol:
            raise DomainError("joint state is not Hermitian")
        if abs(np.trace(m) - 1) > atol:
            raise DomainError(f"joint state trace {np.trace(m).real} != 1")
        if np.linalg.eigvalsh(m).min() < -psd_tol:
            raise DomainError("joint state is not positive semidefinite")


@dataclass(frozen=True)
class MeasurementSetting:
    bases: tuple[str, ...]

    def __post_init__(self):
        bases = tuple(str(b).upper() for b in self.bases)
        if any(b not in ("Z", "X") for b in bases):
            raise UnsupportedBasisError(f"only Z and X settings are supported: {bases}")
        object.__setattr__(self, "bases", bases)

    @classmethod
    def uniform(cls, basis: str, spins: int) -> "MeasurementSetting":
        return cls((basis,) * spins)


@dataclass(frozen=True)
class EnergyEstimate:
    mean: float
    stderr: float
    shots: int
    mode: str

    @property
    def value(self) -> float:
        return self.mean


def _check_term(term: PauliTerm, circuit: AnsatzCircuit) -> None:
    if max(term.sites) >= circuit.spins:
        raise IndexError(f"term {term} exceeds {circuit.spins} sites")
    for site, op in term.factors:
        if op == "Y":
            raise UnsupportedBasisError("Y measurements are not supported")
        if op != circuit.bases[site]:
            raise UnsupportedBasisError(
                f"term {term} needs basis {op} at site {site}, circuit has {circuit.bases[site]}"
            )


def _reset_q(rho_s: np.ndarray, model: NoiseModel) -> np.ndarray:
    return np.kron(rho_s, model.reset_state())


def _partial_weighted_trace(rho: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Tr_Q[(I (x) W) rho] for a 4x4 operator on S (x) Q."""
    r = rho.reshape(2, 2, 2, 2)  # s, q, s', q'
    return np.einsum("qk,skpq->sp", w, r)


def contract_expectation(
    circuit: AnsatzCircuit,
    params,
    model: NoiseModel,
    term: PauliTerm,
    validate: bool = False,
) -> float:
    """Exact expectation of the +-1 outcome product of ``term`` (coefficient excluded).

    Explicit propagation of the joint 4x4 operator. With ``validate`` the
    unconditional joint state is carried alongside and checked after every
    channel.
    """
    if params is not None:
        circuit = circuit.with_params(params)
    _check_term(term, circuit)
    support = set(term.sites)
    rho = _reset_q(np.diag([1.0, 0.0]).astype(complex), model)
    shadow = rho.copy() if validate else None
    for event in gate_schedule(circuit, durations=model.durations):
        if event.kind == MEASURE_RESET:
            w = _W["Z"] if event.site in support else _W["I"]
            rho = _reset_q(_partial_weighted_trace(rho, w), model)
            if validate:
                shadow = _reset_q(_partial_weighted_trace(shadow, _W["I"]), model)
                JointState(shadow).validate()
            continue
        channel = gate_noise_channel(event, model)
        rho = channel.apply(rho)
        if validate:
            shadow = channel.apply(shadow)
            JointState(shadow).validate()
            if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
                raise DomainError("weighted operator lost Hermiticity")
    value = np.trace(rho)
    return float(np.clip(value.real, -1.0, 1.0))


# --- transfer maps -------------------------------------------------------------
#
# A segment is everything between two resets. Its transfer map is obtained by
# pushing the four operators |a><c| (x) rho_reset through the segment and
# taking the weighted partial trace over Q of each image.


def _basis_inputs(reset: np.ndarray) -> np.ndarray:
    return _basis_inputs_cached(tuple(np.diag(reset).real))


@lru_cache(maxsize=64)
def _basis_inputs_cached(populations: tuple[float, float]) -> np.ndarray:
    reset = np.diag(populations).astype(complex)
    ops = np.zeros((4, 4, 4), dtype=complex)
    for k, (a, c) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
        unit = np.zeros((2, 2))
        unit[a, c] = 1.0
        ops[k] = np.kron(unit, reset)
    ops.setflags(write=False)
    return ops


def _weighted_trace(w: np.ndarray) -> np.ndarray:
    """4x16 matrix taking vec(rho) to vec(Tr_Q[(I (x) W) rho])."""
    r = np.zeros((2, 2, 2, 2, 2, 2), dtype=complex)  # s, s' ; s, k, s', q
    for s in range(2):
        for p in range(2):
            r[s, p, s, :, p, :] = w.T
    return r.reshape(4, 16)


_TRACES = {label: _weighted_trace(w) for label, w in _W.items()}


def _apply_event(ops: np.ndarray, event: GateEvent, model: NoiseModel) -> np.ndarray:
    u = event.unitary
    ops = u @ ops @ u.conj().T
    return apply_idle(ops, event.duration, model)


def _segment_images(events: Sequence[GateEvent], model: NoiseModel) -> list[np.ndarray]:
    """Images of the four embedded basis operators at each measurement."""
    start = _basis_inputs(model.reset_state())
    images = []
    ops = start
    pending = None  # product of consecutive noiseless unitaries
    for event in events:
        if event.kind == MEASURE_RESET:
            if pending is not None:
                ops = pending @ ops @ pending.conj().T
                pending = None
            images.append(ops)
            ops = start
            continue
        pending = event.unitary if pending is None else event.unitary @ pending
        if not (model.is_ideal or event.duration == 0):
            ops = pending @ ops @ pending.conj().T
            pending = None
            ops = apply_idle(ops, event.duration, model)
    return images


def _maps_from_images(images: np.ndarray, weights: Sequence[str]) -> list[np.ndarray]:
    flat = images.reshape(4, 16).T
    return [_TRACES[label] @ flat for label in weights]


def transfer_maps(
    circuit: AnsatzCircuit,
    model: NoiseModel,
    weights: Sequence[str] = ("I", "Z"),
) -> list[list[np.ndarray]]:
    """Per-site 4x4 maps on row-major vec(rho_S), one map per weight label."""
    events = gate_schedule(circuit, durations=model.durations)
    return [_maps_from_images(im, weights) for im in _segment_images(events, model)]


def _setting_expectations(maps: list[list[np.ndarray]], terms: Sequence[PauliTerm]) -> np.ndarray:
    """Exact +-1 product expectations for terms, maps indexed [site][I, Z]."""
    values = np.empty(len(terms))
    for k, term in enumerate(terms):
        support = set(term.sites)
        v = _RHO_S0
        for site, (t_i, t_z) in enumerate(maps):
            v = (t_z if site in support else t_i) @ v
        values[k] = (_TRACE_S @ v).real
    return values


def _group_terms(ising: IsingModel) -> dict[str, list[PauliTerm]]:
    groups: dict[str, list[PauliTerm]] = {"Z": [], "X": []}
    for term in ising.terms:
        ops = set(term.operators)
        if ops == {"Z"}:
            groups["Z"].append(term)
        elif ops == {"X"}:
            groups["X"].append(term)
        else:
            raise UnsupportedBasisError(f"term {term} needs a mixed or Y setting")
    return groups


def term_expectations(circuit: AnsatzCircuit, params, model: NoiseModel, ising: IsingModel):
    """Exact expectations of every term of ``ising`` (coefficients excluded)."""
    if params is not None:
        circuit = circuit.with_params(params)
    if circuit.spins != ising.spins:
        raise DomainError(f"circuit has {circuit.spins} sites, model has {ising.spins}")
    groups = _group_terms(ising)
    out = {t: 0.0 for t in ising.terms}
    z_images = _segment_images(
        gate_schedule(circuit.with_bases("Z"), durations=model.durations), model
    )
    for basis, terms in groups.items():
        active = [t for t in terms if t.coefficient != 0.0]
        if not active:
            continue
        images = z_images
        if basis == "X":
            # the X setting only appends a Hadamard to every segment
            images = [
                _apply_event(im, basis_change_event(i, circuit.layers, model.durations), model)
                for i, im in enumerate(z_images)
            ]
        maps = [_maps_from_images(im, ("I", "Z")) for im in images]
        out.update(zip(active, _setting_expectations(maps, active)))
    return out


def estimate_energy_exact(circuit: AnsatzCircuit, params, model: NoiseModel, ising: IsingModel) -> EnergyEstimate:
    """Sum of coefficient * exact term expectation; one Z and one X pass."""
    values = term_expectations(circuit, params, model, ising)
    mean = float(sum(t.coefficient * v for t, v in values.items()))
    return EnergyEstimate(mean, 0.0, 0, "exact")


# --- sampling -----------------------------------------------------------------


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(block,)))


def _sample_block(maps: list[list[np.ndarray]], uniforms: np.ndarray) -> np.ndarray:
    shots, m = uniforms.shape
    bits = np.zeros((shots, m), dtype=np.uint8)
    v = np.tile(_RHO_S0, (shots, 1))
    for site, (t0, t1) in enumerate(maps):
        v0 = v @ t0.T
        v1 = v @ t1.T
        p0 = (v0 @ _TRACE_S).real
        p1 = (v1 @ _TRACE_S).real
        prob1 = np.clip(p1 / (p0 + p1), 0.0, 1.0)
        one = uniforms[:, site] < prob1
        bits[:, site] = one
        norm = np.where(one, p1, p0)
        norm = np.where(norm > 0, norm, 1.0)
        v = np.where(one[:, None], v1, v0) / norm[:, None]
    return bits


def sample_bitstrings(
    circuit: AnsatzCircuit,
    params,
    model: NoiseModel,
    setting: MeasurementSetting,
    shots: int,
    seed: int,
) -> np.ndarray:
    """Array (shots, M) of measured bits.

    Random numbers are drawn per fixed block of shots from streams keyed by
    (seed, block index), so any partition of the blocks over workers
    reproduces the same records.
    """
    if shots < 1:
        raise DomainError("need at least one shot")
    if params is not None:
        circuit = circuit.with_params(params)
    if len(setting.bases) != circuit.spins:
        raise DomainError("measurement setting length does not match the circuit")
    maps = transfer_maps(circuit.with_bases(setting.bases), model, weights=("0", "1"))
    blocks = []
    for b, start in enumerate(range(0, shots, SAMPLE_BLOCK)):
        n = min(SAMPLE_BLOCK, shots - start)
        uniforms = _block_rng(seed, b).random((n, circuit.spins))
        blocks.append(_sample_block(maps, uniforms))
    return np.concatenate(blocks, axis=0)


def _derive(seed: int, *keys: int) -> int:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def per_shot_energy(bits: np.ndarray, terms: Sequence[PauliTerm]) -> np.ndarray:
    spins = 1.0 - 2.0 * bits.astype(float)
    total = np.zeros(bits.shape[0])
    for term in terms:
        total += term.coefficient * np.prod(spins[:, list(term.sites)], axis=1)
    return total


def estimate_energy_sampled(
    circuit: AnsatzCircuit,
    params,
    model: NoiseModel,
    ising: IsingModel,
    shots_total: int,
    seed: int,
    z_fraction: float = 0.5,
) -> EnergyEstimate:
    """Shot estimate from one all-Z and one all-X setting.

    Per-shot energies within a setting already include the covariance
    between terms sharing those shots; the two settings are independent.
    """
    if shots_total < 2:
        raise DomainError("need at least two shots to cover both settings")
    if params is not None:
        circuit = circuit.with_params(params)
    groups = _group_terms(ising)
    n_z = int(round(shots_total * z_fraction))
    n_z = min(max(n_z, 1), shots_total - 1)
    plan = {"Z": n_z, "X": shots_total - n_z}
    mean = 0.0
    var = 0.0
    for k, basis in enumerate(("Z", "X")):
        terms = [t for t in groups[basis] if t.coefficient != 0.0]
        if not terms:
            continue
        setting = MeasurementSetting.uniform(basis, circuit.spins)
        bits = sample_bitstrings(circuit, None, model, setting, plan[basis], _derive(seed, k))
        values = per_shot_energy(bits, terms)
        mean += float(values.mean())
        if len(values) > 1:
            var += float(values.var(ddof=1)) / len(values)
    return EnergyEstimate(mean, float(np.sqrt(var)), int(shots_total), "sampled")
