"""Decoherence channels, noise scaling and controlled-damping physics.

Transmon (Q) rates are multiplied by the scale factor ``c``; storage (S)
rates are never scaled. ``c = 0`` is the noiseless limit: every channel,
including the storage ones, is switched off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from itertools import product
from typing import Sequence

import numpy as np

from .ansatz import GateDurations, GateEvent
from .errors import DomainError, FitQualityError, InvalidRatesError
from .model import PAULI

# Table S2 of the device characterisation
T1_Q = 24e-6
T2STAR_Q = 28e-6
T1_S = 740e-6
T2STAR_S = 510e-6
THERMAL_Q = 0.034
GAMMA_R = 1.0 / 68e-9


@dataclass(frozen=True, eq=False)
class KrausChannel:
    operators: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.operators)
        if not ops:
            raise DomainError("a channel needs at least one Kraus operator")
        d = ops[0].shape[0]
        if any(k.shape != (d, d) for k in ops):
            raise DomainError("Kraus operators must be square and equally sized")
        object.__setattr__(self, "operators", ops)
        if self.completeness_error() > 1e-10:
            raise DomainError("Kraus operators are not trace preserving")

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    def completeness_error(self) -> float:
        acc = sum(k.conj().T @ k for k in self.operators)
        return float(np.max(np.abs(acc - np.eye(self.dim))))

    def is_trace_preserving(self, atol: float = 1e-12) -> bool:
        return self.completeness_error() <= atol

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.operators)

    def superoperator(self) -> np.ndarray:
        """Matrix acting on row-major vec(rho)."""
        return sum(np.kron(k, k.conj()) for k in self.operators)

    def then(self, other: "KrausChannel") -> "KrausChannel":
        """Apply ``self`` first, then ``other``."""
        return KrausChannel(tuple(b @ a for a, b in product(self.operators, other.operators)))

    def tensor(self, other: "KrausChannel") -> "KrausChannel":
        return KrausChannel(tuple(np.kron(a, b) for a, b in product(self.operators, other.operators)))

    @classmethod
    def identity(cls, dim: int = 2) -> "KrausChannel":
        return cls((np.eye(dim, dtype=complex),))

    @classmethod
    def unitary(cls, u: np.ndarray) -> "KrausChannel":
        return cls((np.asarray(u, dtype=complex),))


def amplitude_damping(t: float, T1: float) -> KrausChannel:
    """Decay |e> -> |g> with probability 1 - exp(-t / T1)."""
    if t < 0:
        raise DomainError(f"negative duration {t}")
    if not T1 > 0:
        raise InvalidRatesError(f"T1 must be positive, got {T1}")
    p = -math.expm1(-t / T1) if math.isfinite(T1) else 0.0
    k0 = np.array([[1, 0], [0, math.sqrt(1 - p)]], dtype=complex)
    k1 = np.array([[0, math.sqrt(p)], [0, 0]], dtype=complex)
    return KrausChannel((k0, k1))


def dephasing_rate(T1: float, T2star: float) -> float:
    """Pure dephasing rate 1/T2* - 1/(2 T1)."""
    if not (T1 > 0 and T2star > 0):
        raise InvalidRatesError("coherence times must be positive")
    if T2star > 2 * T1 * (1 + 1e-12):
        raise InvalidRatesError(f"T2* = {T2star} exceeds 2 T1 = {2 * T1}")
    return max(0.0, 1.0 / T2star - 1.0 / (2.0 * T1))


def phase_damping(t: float, gamma_phi: float) -> KrausChannel:
    """Off-diagonals decay by exp(-gamma_phi t), populations untouched."""
    if t < 0:
        raise DomainError(f"negative duration {t}")
    if gamma_phi < 0:
        raise InvalidRatesError("dephasing rate must be non-negative")
    lam = math.exp(-gamma_phi * t)
    k0 = np.diag([1.0, lam]).astype(complex)
    k1 = np.diag([0.0, math.sqrt(max(0.0, 1 - lam * lam))]).astype(complex)
    return KrausChannel((k0, k1))


def pure_dephasing(t: float, T1: float, T2star: float) -> KrausChannel:
    return phase_damping(t, dephasing_rate(T1, T2star))


@dataclass(frozen=True)
class DecoherenceRates:
    T1_q: float = T1_Q
    T2star_q: float = T2STAR_Q
    T1_s: float = T1_S
    T2star_s: float = T2STAR_S
    thermal_q: float = 0.0

    def __post_init__(self):
        for name in ("T1_q", "T2star_q", "T1_s", "T2star_s"):
            if not getattr(self, name) > 0:
                raise InvalidRatesError(f"{name} must be positive")
        if not 0 <= self.thermal_q <= 0.5:
            raise InvalidRatesError("thermal population must lie in [0, 0.5]")
        # raises on T2* > 2 T1
        dephasing_rate(self.T1_q, self.T2star_q)
        dephasing_rate(self.T1_s, self.T2star_s)

    @property
    def gamma1_q(self) -> float:
        return 1.0 / self.T1_q

    @property
    def gamma_phi_q(self) -> float:
        return dephasing_rate(self.T1_q, self.T2star_q)

    @property
    def gamma1_s(self) -> float:
        return 1.0 / self.T1_s

    @property
    def gamma_phi_s(self) -> float:
        return dephasing_rate(self.T1_s, self.T2star_s)


@dataclass(frozen=True)
class NoiseModel:
    """Rates, noise scale and gate durations.

    ``scale`` multiplies the transmon relaxation rate; ``scale_phi``
    multiplies its pure-dephasing rate and follows ``scale`` when None.
    """

    rates: DecoherenceRates = field(default_factory=DecoherenceRates)
    scale: float = 1.0
    durations: GateDurations = field(default_factory=GateDurations)
    scale_phi: float | None = None

    def __post_init__(self):
        if not self.scale >= 0:
            raise DomainError(f"noise scale must be >= 0, got {self.scale}")
        if self.scale_phi is not None and not self.scale_phi >= 0:
            raise DomainError("scale_phi must be >= 0")

    @classmethod
    def ideal(cls, durations: GateDurations | None = None) -> "NoiseModel":
        return cls(scale=0.0, durations=durations or GateDurations())

    @property
    def is_ideal(self) -> bool:
        return self.scale == 0.0

    @property
    def phi_scale(self) -> float:
        return self.scale if self.scale_phi is None else self.scale_phi

    def with_scale(self, scale: float) -> "NoiseModel":
        return NoiseModel(self.rates, float(scale), self.durations, self.scale_phi)

    def reset_state(self) -> np.ndarray:
        """Density matrix of a freshly reset transmon."""
        th = 0.0 if self.is_ideal else self.rates.thermal_q
        return np.diag([1.0 - th, th]).astype(complex)


def idle_channel(t: float, model: NoiseModel) -> KrausChannel:
    """Decoherence on S (x) Q accumulated over ``t`` seconds."""
    if model.is_ideal or t == 0:
        return KrausChannel.identity(4)
    r = model.rates
    q = amplitude_damping(t, r.T1_q / model.scale).then(
        phase_damping(t, model.phi_scale * r.gamma_phi_q)
    )
    s = amplitude_damping(t, r.T1_s).then(phase_damping(t, r.gamma_phi_s))
    return s.tensor(q)


def gate_noise_channel(event: GateEvent, model: NoiseModel) -> KrausChannel:
    """Ideal gate unitary followed by decoherence over the gate duration."""
    if event.duration < 0:
        raise DomainError("event duration must be set and non-negative")
    u = np.eye(4, dtype=complex) if event.unitary is None else event.unitary
    return KrausChannel.unitary(u).then(idle_channel(event.duration, model))


@lru_cache(maxsize=4096)
def idle_superoperator(t: float, model: NoiseModel) -> np.ndarray:
    return idle_channel(t, model).superoperator()


def _damping_factors(t: float, gamma1: float, gamma_phi: float) -> tuple[float, float]:
    """(decay probability, coherence factor) of damping followed by dephasing."""
    p = -math.expm1(-gamma1 * t)
    return p, math.sqrt(1.0 - p) * math.exp(-gamma_phi * t)


def apply_idle(ops: np.ndarray, t: float, model: NoiseModel) -> np.ndarray:
    """``idle_channel(t, model)`` applied to a stack of 4x4 operators.

    Uses the closed form of damping plus dephasing on each qubit, which
    avoids building a superoperator for every distinct duration.
    """
    if model.is_ideal or t == 0:
        return ops
    d = model.durations
    if t in (d.q_rotation, d.s_gate, d.decode):
        # fixed gate lengths recur on every call; a cached matrix is cheaper
        sup = idle_superoperator(t, model)
        return (np.reshape(ops, (-1, 16)) @ sup.T).reshape(np.shape(ops))
    r = model.rates
    shape = np.shape(ops)
    x = np.asarray(ops).reshape(-1, 2, 2, 2, 2)  # s, q, s', q'
    p, a = _damping_factors(t, r.gamma1_s, r.gamma_phi_s)
    y = x * np.array([[1.0, a], [a, 1.0 - p]])[None, :, None, :, None]
    y[:, 0, :, 0, :] += p * x[:, 1, :, 1, :]
    p, a = _damping_factors(t, model.scale * r.gamma1_q, model.phi_scale * r.gamma_phi_q)
    z = y * np.array([[1.0, a], [a, 1.0 - p]])[None, None, :, None, :]
    z[:, :, 0, :, 0] += p * y[:, :, 1, :, 1]
    return z.reshape(shape)


# --- noise injection ---------------------------------------------------------


@dataclass(frozen=True)
class InjectionConfig:
    """Drive amplitudes (angular frequencies) and readout decay rate."""

    omega_ef: float
    omega_f0g1: float
    gamma_r: float = GAMMA_R

    @property
    def valid(self) -> bool:
        return self.omega_ef < self.omega_f0g1 < self.gamma_r


def injected_rate(cfg: InjectionConfig) -> tuple[float, bool]:
    """Added transmon damping (omega_ef / omega_f0g1)^2 * gamma_r and validity flag."""
    if cfg.omega_f0g1 <= 0 or cfg.gamma_r <= 0 or cfg.omega_ef < 0:
        raise DomainError("injection drives and rates must be positive")
    return (cfg.omega_ef / cfg.omega_f0g1) ** 2 * cfg.gamma_r, cfg.valid


def drive_for_scale(
    c_target: float,
    rates: DecoherenceRates,
    omega_f0g1: float,
    gamma_r: float = GAMMA_R,
) -> float:
    """Omega_ef that raises the transmon decay rate by the factor ``c_target``."""
    if c_target < 1:
        raise DomainError("injection can only add noise: c_target must be >= 1")
    gamma_add = (c_target - 1.0) * rates.gamma1_q
    return omega_f0g1 * math.sqrt(gamma_add / gamma_r)


# --- controlled damping through a transient level ---------------------------


def lindbladian(h: np.ndarray, collapse: Sequence[np.ndarray]) -> np.ndarray:
    """Generator acting on row-major vec(rho)."""
    d = h.shape[0]
    eye = np.eye(d)
    gen = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for c in collapse:
        cdc = c.conj().T @ c
        gen = gen + np.kron(c, c.conj()) - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T)
    return gen


def rk4_propagator(gen: np.ndarray, dt: float) -> np.ndarray:
    """One classical RK4 step for the linear system d/dt x = gen x."""
    a = gen * dt
    eye = np.eye(gen.shape[0], dtype=complex)
    a2 = a @ a
    return eye + a + a2 / 2 + a2 @ a / 6 + a2 @ a2 / 24


def integrate_linear(gen: np.ndarray, x0: np.ndarray, times: np.ndarray, max_step: float) -> np.ndarray:
    """Fixed-step RK4 samples of x(t) at the ascending ``times``.

    Each gap between samples is split into equal steps no longer than
    ``max_step``.
    """
    x = np.asarray(x0, dtype=complex)
    out = np.empty((len(times),) + x.shape, dtype=complex)
    t_prev = 0.0
    for i, t in enumerate(np.asarray(times, dtype=float)):
        gap = t - t_prev
        if gap > 0:
            n = int(math.ceil(gap / max_step))
            step = rk4_propagator(gen, gap / n)
            for _ in range(n):
                x = step @ x
        out[i] = x
        t_prev = t
    return out


@dataclass(frozen=True)
class TransientLevelConfig:
    """Drive ``omega`` on e <-> T and decay ``gamma`` from T to g."""

    omega: float
    gamma: float
    samples: int = 40
    steps_per_timescale: int = 50
    max_fit_residual: float = 1e-2

    def __post_init__(self):
        if not (self.omega > 0 and self.gamma > 0):
            raise DomainError("omega and gamma must be positive")

    @property
    def closed_form_gamma1(self) -> float:
        w2 = 4 * self.omega**2
        return w2 * self.gamma / (w2 + self.gamma**2)

    @property
    def adiabatic_gamma1(self) -> float:
        return 4 * self.omega**2 / self.gamma

    @property
    def adiabatic_gamma2(self) -> float:
        return 2 * self.omega**2 / self.gamma


@dataclass(frozen=True)
class DecayFit:
    gamma1: float
    gamma2: float
    residual1: float
    residual2: float


def fit_exponential_rate(times: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Least-squares slope of log(values); returns (rate, rms residual)."""
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0):
        raise FitQualityError("observable reached zero inside the fit window")
    y = np.log(values)
    slope, intercept = np.polyfit(times, y, 1)
    resid = y - (slope * times + intercept)
    return float(-slope), float(np.sqrt(np.mean(resid**2)))


def simulate_transient_decay(cfg: TransientLevelConfig) -> DecayFit:
    """Integrate the g/e/T Lindblad equation and fit effective rates.

    Population of e starts at 1; the g-e coherence starts at 1/2. Both are
    fitted over [0.5, 3] / gamma1_expected.
    """
    g, e, t_ = 0, 1, 2
    h = np.zeros((3, 3), dtype=complex)
    h[e, t_] = h[t_, e] = cfg.omega
    jump = np.zeros((3, 3), dtype=complex)
    jump[g, t_] = math.sqrt(cfg.gamma)
    gen = lindbladian(h, [jump])

    rho_pop = np.zeros((3, 3), dtype=complex)
    rho_pop[e, e] = 1.0
    rho_coh = np.zeros((3, 3), dtype=complex)
    rho_coh[g, g] = rho_coh[e, e] = rho_coh[g, e] = rho_coh[e, g] = 0.5
    x0 = np.stack([rho_pop.reshape(-1), rho_coh.reshape(-1)], axis=1)

    expected = cfg.closed_form_gamma1
    times = np.linspace(0.5 / expected, 3.0 / expected, cfg.samples)
    max_step = min(1 / cfg.gamma, 1 / cfg.omega) / cfg.steps_per_timescale
    xs = integrate_linear(gen, x0, times, max_step)
    pop = xs[:, e * 3 + e, 0].real
    coh = np.abs(xs[:, g * 3 + e, 1])
    g1, r1 = fit_exponential_rate(times, pop)
    g2, r2 = fit_exponential_rate(times, coh)
    worst = max(r1, r2)
    if worst > cfg.max_fit_residual:
        raise FitQualityError(f"decay is not single-exponential (rms log residual {worst:.3g})")
    return DecayFit(g1, g2, r1, r2)


@dataclass(frozen=True)
class CascadeConfig:
    """Four-level g, e, f, T chain used to engineer extra transmon damping.

    ``omega_ef`` couples e <-> f, ``omega_f0g1`` couples f <-> T (|g,1> of
    the readout cavity) and T decays to g at ``gamma_r``.
    """

    omega_ef: float
    omega_f0g1: float
    gamma_r: float = GAMMA_R
    samples: int = 40
    steps_per_timescale: int = 50

    @classmethod
    def from_ratio(cls, ratio: float, gamma_r: float = GAMMA_R, f0g1_fraction: float = 0.25):
        """Cascade with omega_ef / omega_f0g1 = ``ratio`` and omega_f0g1 = fraction * gamma_r."""
        omega_f0g1 = f0g1_fraction * gamma_r
        return cls(ratio * omega_f0g1, omega_f0g1, gamma_r)

    @property
    def injection(self) -> InjectionConfig:
        return InjectionConfig(self.omega_ef, self.omega_f0g1, self.gamma_r)


def simulate_cascade_decay(cfg: CascadeConfig) -> tuple[float, float]:
    """Fitted decay rate of the e population and its rms log residual."""
    expected, _ = injected_rate(cfg.injection)
    if expected <= 0:
        raise DomainError("cascade needs a non-zero e-f drive")
    g, e, f, t_ = range(4)
    h = np.zeros((4, 4), dtype=complex)
    h[e, f] = h[f, e] = cfg.omega_ef
    h[f, t_] = h[t_, f] = cfg.omega_f0g1
    jump = np.zeros((4, 4), dtype=complex)
    jump[g, t_] = math.sqrt(cfg.gamma_r)
    gen = lindbladian(h, [jump])
    rho0 = np.zeros((4, 4), dtype=complex)
    rho0[e, e] = 1.0
    times = np.linspace(0.5 / expected, 3.0 / expected, cfg.samples)
    max_step = min(1 / cfg.gamma_r, 1 / cfg.omega_f0g1, 1 / cfg.omega_ef) / cfg.steps_per_timescale
    xs = integrate_linear(gen, rho0.reshape(-1), times, max_step)
    return fit_exponential_rate(times, xs[:, e * 4 + e].real)


# --- process fidelity ---------------------------------------------------------


def _pauli_basis(num_qubits: int) -> list[np.ndarray]:
    singles = [PAULI[k] for k in "IXYZ"]
    return [reduce(np.kron, ps) for ps in product(singles, repeat=num_qubits)]


def pauli_transfer_matrix(channel: KrausChannel) -> np.ndarray:
    """R_ij = Tr(P_i E(P_j)) / d over the Pauli basis."""
    d = channel.dim
    n = int(round(math.log2(d)))
    if 2**n != d:
        raise DomainError("channel dimension must be a power of two")
    basis = _pauli_basis(n)
    images = [channel.apply(p) for p in basis]
    return np.array([[np.trace(pi @ ej).real / d for ej in images] for pi in basis])


def pauli_transfer_fidelity(actual: KrausChannel, ideal: np.ndarray) -> float:
    """Tr(R_ideal^T R_actual) / d^2."""
    ideal = np.asarray(ideal, dtype=complex)
    if ideal.shape != (actual.dim, actual.dim):
        raise DomainError(f"dimension mismatch: {ideal.shape} vs channel dim {actual.dim}")
    r_actual = pauli_transfer_matrix(actual)
    r_ideal = pauli_transfer_matrix(KrausChannel.unitary(ideal))
    d = actual.dim
    return float(np.clip(np.trace(r_ideal.T @ r_actual) / d**2, 0.0, 1.0))
