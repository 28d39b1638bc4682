"""Sequential two-qubit ansatz: storage qubit S and reusable transmon Q.

Each layer acts on S and a freshly reset Q, after which Q is measured and
reset. After the last layer the storage qubit is swapped onto Q (decode)
and measured. ``N`` layers therefore produce ``N + 1`` measured sites.

Joint two-qubit operators are ordered S (x) Q, i.e. basis index ``2*s + q``.

Two layer decompositions are provided. Both use seven angles.

``primary``:   U = [P(t7) H P(t6) (x) I] CPHASE(t5) [P(t4) H (x) Rz(t3) Ry(t2) Rz(t1)]
``fallback``:  U = [P(t7) H P(t6) (x) Ry(t1)] CPHASE(t5) [P(t4) H (x) Rz(t3) Ry(t2)]

In ``primary`` the first Rz acts on a freshly reset |g> and is inert, and
t4, t6 only enter through their sum, so a single layer cannot reach every
two-qubit state. ``fallback`` moves t1 to a Ry on Q after the entangler and
is the default.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import InvalidModelError, ResourceLimitError

MAX_STATEVECTOR_LAYERS = 11
DECOMPOSITIONS = ("primary", "fallback")
DEFAULT_DECOMPOSITION = "fallback"

TWO_PI = 2.0 * math.pi
# cross-Kerr between transmon and storage cavity, chi_qs / 2pi = 0.945 MHz
CHI_QS = TWO_PI * 0.945e6

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0)
_I2 = np.eye(2, dtype=complex)
_H_Q = np.kron(_I2, _H)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)

Q_ROT = "Q_ROT"
S_PRE = "S_PRE"
CPHASE = "CPHASE"
S_POST = "S_POST"
BASIS_H = "BASIS_H"
MEASURE_RESET = "MEASURE_RESET"
DECODE = "DECODE"
EVENT_KINDS = (Q_ROT, S_PRE, CPHASE, S_POST, BASIS_H, MEASURE_RESET, DECODE)


def canonical_angle(x: float) -> float:
    """Map an angle onto (-pi, pi]."""
    y = math.pi - math.fmod(math.pi - float(x), TWO_PI)
    if y > math.pi:
        y -= TWO_PI
    elif y <= -math.pi:
        y += TWO_PI
    return y


def phase(theta: float) -> np.ndarray:
    return np.array([[1.0, 0.0], [0.0, cmath.exp(1j * theta)]])


def rz(theta: float) -> np.ndarray:
    return np.array([[cmath.exp(-0.5j * theta), 0.0], [0.0, cmath.exp(0.5j * theta)]])


def ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def cphase(theta: float) -> np.ndarray:
    u = np.eye(4, dtype=complex)
    u[3, 3] = cmath.exp(1j * theta)
    return u


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two matrices (cheaper than np.kron for tiny inputs)."""
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(
        a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]
    )


def on_s(u: np.ndarray) -> np.ndarray:
    return kron(u, _I2)


def on_q(u: np.ndarray) -> np.ndarray:
    return kron(_I2, u)


@dataclass(frozen=True)
class LayerParams:
    """Seven angles of one layer, canonicalized to (-pi, pi]."""

    angles: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(a) for a in self.angles)
        if len(values) != 7:
            raise InvalidModelError(f"a layer takes 7 angles, got {len(values)}")
        if not all(math.isfinite(a) for a in values):
            raise InvalidModelError(f"non-finite layer angle in {values}")
        object.__setattr__(self, "angles", tuple(canonical_angle(a) for a in values))

    @classmethod
    def zeros(cls) -> "LayerParams":
        return cls((0.0,) * 7)

    def as_array(self) -> np.ndarray:
        return np.array(self.angles)

    def __getitem__(self, i):
        return self.angles[i]


@dataclass(frozen=True)
class GateDurations:
    """Gate durations in seconds; ``chi_qs`` is an angular frequency."""

    q_rotation: float = 40e-9
    s_gate: float = 3e-6
    decode: float = 2e-6
    measure_reset: float = 0.0
    chi_qs: float = CHI_QS

    def __post_init__(self):
        for name in ("q_rotation", "s_gate", "decode", "chi_qs"):
            if not getattr(self, name) > 0:
                raise InvalidModelError(f"{name} must be positive")
        if self.measure_reset < 0:
            raise InvalidModelError("measure_reset must be non-negative")

    def cphase(self, theta: float) -> float:
        return abs(theta) / self.chi_qs


@dataclass(frozen=True, eq=False)
class GateEvent:
    """One scheduled operation.

    ``unitary`` is the ideal 4x4 action on S (x) Q, or None for
    MEASURE_RESET. ``site`` is set for measurement events.
    """

    kind: str
    duration: float
    unitary: np.ndarray | None = None
    angles: tuple[float, ...] = ()
    site: int | None = None


@dataclass(frozen=True)
class AnsatzCircuit:
    layers: int
    params: tuple[LayerParams, ...]
    bases: tuple[str, ...]
    decomposition: str = DEFAULT_DECOMPOSITION

    def __post_init__(self):
        if self.layers < 1:
            raise InvalidModelError("need at least one layer")
        params = tuple(p if isinstance(p, LayerParams) else LayerParams(p) for p in self.params)
        object.__setattr__(self, "params", params)
        bases = tuple(str(b).upper() for b in self.bases)
        object.__setattr__(self, "bases", bases)
        if len(params) != self.layers:
            raise InvalidModelError(f"expected {self.layers} layer params, got {len(params)}")
        if len(bases) != self.layers + 1:
            raise InvalidModelError(f"expected {self.layers + 1} bases, got {len(bases)}")
        if any(b not in ("Z", "X") for b in bases):
            raise InvalidModelError(f"bases must be Z or X: {bases}")
        if self.decomposition not in DECOMPOSITIONS:
            raise InvalidModelError(f"unknown decomposition {self.decomposition!r}")

    @property
    def spins(self) -> int:
        return self.layers + 1

    @property
    def num_parameters(self) -> int:
        return 7 * self.layers

    @classmethod
    def create(cls, layers: int, params=None, bases="Z", decomposition=DEFAULT_DECOMPOSITION):
        """Convenience constructor; ``bases`` may be a single letter for all sites."""
        if params is None:
            params = np.zeros((layers, 7))
        params = np.asarray(params, dtype=float).reshape(layers, 7)
        if isinstance(bases, str):
            bases = (bases,) * (layers + 1)
        return cls(layers, tuple(LayerParams(p) for p in params), tuple(bases), decomposition)

    def with_params(self, theta) -> "AnsatzCircuit":
        theta = np.asarray(theta, dtype=float).reshape(self.layers, 7)
        return AnsatzCircuit(
            self.layers, tuple(LayerParams(p) for p in theta), self.bases, self.decomposition
        )

    def with_bases(self, bases) -> "AnsatzCircuit":
        if isinstance(bases, str):
            bases = (bases,) * self.spins
        return AnsatzCircuit(self.layers, self.params, tuple(bases), self.decomposition)

    def flat_params(self) -> np.ndarray:
        return np.concatenate([p.as_array() for p in self.params])


def _layer_gates(p: LayerParams, decomposition: str, durations: GateDurations):
    """Ordered (kind, 4x4 unitary, duration, angles) tuples of one layer."""
    t1, t2, t3, t4, t5, t6, t7 = p.angles
    if decomposition == "primary":
        k_q = rz(t3) @ ry(t2) @ rz(t1)
        q_angles = (t1, t2, t3)
    elif decomposition == "fallback":
        k_q = rz(t3) @ ry(t2)
        q_angles = (t2, t3)
    else:
        raise InvalidModelError(f"unknown decomposition {decomposition!r}")
    gates = [
        (Q_ROT, on_q(k_q), durations.q_rotation, q_angles),
        (S_PRE, on_s(phase(t4) @ _H), durations.s_gate, (t4,)),
        (CPHASE, cphase(t5), durations.cphase(t5), (t5,)),
    ]
    if decomposition == "fallback":
        gates.append((Q_ROT, on_q(ry(t1)), durations.q_rotation, (t1,)))
    gates.append((S_POST, on_s(phase(t7) @ _H @ phase(t6)), durations.s_gate, (t6, t7)))
    return gates


def layer_unitary(p: LayerParams, decomposition: str = DEFAULT_DECOMPOSITION) -> np.ndarray:
    """4x4 unitary of one layer on S (x) Q."""
    if not isinstance(p, LayerParams):
        p = LayerParams(p)
    u = np.eye(4, dtype=complex)
    for _, g, _, _ in _layer_gates(p, decomposition, GateDurations()):
        u = g @ u
    return u


def gate_schedule(
    circuit: AnsatzCircuit,
    params=None,
    durations: GateDurations | None = None,
) -> list[GateEvent]:
    """Full event list: layers, basis changes, measure-resets and decode.

    ``params`` optionally overrides the circuit's angles (flat or (N, 7)).
    """
    if params is not None:
        circuit = circuit.with_params(params)
    durations = durations or GateDurations()
    events: list[GateEvent] = []
    for i, p in enumerate(circuit.params):
        for kind, u, t, angles in _layer_gates(p, circuit.decomposition, durations):
            events.append(GateEvent(kind, t, u, angles))
        if circuit.bases[i] == "X":
            events.append(basis_change_event(i, circuit.layers, durations))
        events.append(GateEvent(MEASURE_RESET, durations.measure_reset, site=i))
    events.append(GateEvent(DECODE, durations.decode, SWAP))
    last = circuit.layers
    if circuit.bases[last] == "X":
        events.append(basis_change_event(last, circuit.layers, durations))
    events.append(GateEvent(MEASURE_RESET, durations.measure_reset, site=last))
    return events


def basis_change_event(site: int, layers: int, durations: GateDurations) -> GateEvent:
    """Hadamard on Q before measuring ``site`` in the X basis."""
    # the decoded storage qubit goes through the slow S-gate block
    t = durations.s_gate if site == layers else durations.q_rotation
    return GateEvent(BASIS_H, t, _H_Q, site=site)


def schedule_duration(events: Iterable[GateEvent]) -> float:
    return float(sum(e.duration for e in events))


def _apply_two_site(psi: np.ndarray, u: np.ndarray, a: int, b: int) -> np.ndarray:
    u4 = u.reshape(2, 2, 2, 2)
    psi = np.tensordot(u4, psi, axes=([2, 3], [a, b]))
    return np.moveaxis(psi, [0, 1], [a, b])


def statevector_state(circuit: AnsatzCircuit, params=None) -> np.ndarray:
    """Noise-free state of all M sites via deferred measurement.

    Each layer acts on S and a fresh qubit for its site; the storage qubit
    is finally swapped onto the last site. Basis-change Hadamards are not
    applied. Site 0 is the most significant qubit of the returned vector.
    """
    if params is not None:
        circuit = circuit.with_params(params)
    n = circuit.layers
    if n > MAX_STATEVECTOR_LAYERS:
        raise ResourceLimitError(f"statevector limited to {MAX_STATEVECTOR_LAYERS} layers")
    m = n + 1
    # axis 0 is S, axis i + 1 is site i
    psi = np.zeros((2,) * (m + 1), dtype=complex)
    psi[(0,) * (m + 1)] = 1.0
    for i, p in enumerate(circuit.params):
        psi = _apply_two_site(psi, layer_unitary(p, circuit.decomposition), 0, i + 1)
    psi = _apply_two_site(psi, SWAP, 0, m)
    out = psi[0].reshape(-1)
    return out / np.linalg.norm(out)


def fit_to_target(
    target: Sequence[complex],
    restarts: int = 8,
    seed: int = 0,
    decomposition: str = DEFAULT_DECOMPOSITION,
    tol: float = 1e-9,
) -> tuple[LayerParams, float]:
    """Best single-layer parameters preparing ``target`` from |0, g>.

    Multi-restart Nelder-Mead on the infidelity; stops early once the
    fidelity exceeds ``1 - tol``.
    """
    target = np.asarray(target, dtype=complex).reshape(4)
    target = target / np.linalg.norm(target)
    rng = np.random.default_rng(seed)

    def infidelity(x):
        col = layer_unitary(LayerParams(x), decomposition)[:, 0]
        return 1.0 - abs(np.vdot(target, col)) ** 2

    best_x = np.zeros(7)
    best_f = infidelity(best_x)
    for _ in range(max(1, restarts)):
        if best_f < tol:
            break
        x0 = rng.uniform(-math.pi, math.pi, 7)
        res = minimize(
            infidelity,
            x0,
            method="Nelder-Mead",
            options={"maxiter": 4000, "xatol": 1e-10, "fatol": 1e-14},
        )
        if res.fun < best_f:
            best_f, best_x = float(res.fun), res.x
    fidelity = min(1.0, max(0.0, 1.0 - best_f))
    return LayerParams(best_x), fidelity
