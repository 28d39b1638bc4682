import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqvqe.ansatz import AnsatzCircuit, GateDurations, GateEvent, Q_ROT, gate_schedule
from seqvqe.errors import DomainError, FitQualityError, InvalidRatesError
from seqvqe.model import PAULI
from seqvqe.noise import (
    GAMMA_R,
    CascadeConfig,
    DecoherenceRates,
    InjectionConfig,
    KrausChannel,
    NoiseModel,
    TransientLevelConfig,
    amplitude_damping,
    apply_idle,
    dephasing_rate,
    drive_for_scale,
    gate_noise_channel,
    idle_channel,
    injected_rate,
    pauli_transfer_fidelity,
    pauli_transfer_matrix,
    phase_damping,
    pure_dephasing,
    simulate_cascade_decay,
    simulate_transient_decay,
)

US = 1e-6


def random_density(dim, rng):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def assert_valid_state(rho):
    assert abs(np.trace(rho) - 1) <= 1e-12
    assert np.allclose(rho, rho.conj().T, atol=1e-12)
    assert np.linalg.eigvalsh(rho).min() >= -1e-10


def test_amplitude_damping_probability():
    ch = amplitude_damping(24 * US, 24 * US)
    assert abs(ch.operators[1][0, 1]) ** 2 == pytest.approx(1 - math.exp(-1), abs=1e-12)
    out = ch.apply(np.diag([0, 1]).astype(complex))
    assert out[1, 1].real == pytest.approx(0.3679, abs=1e-4)
    assert out[1, 1].real == pytest.approx(math.exp(-1), abs=1e-12)


def test_amplitude_damping_zero_time_and_errors():
    ch = amplitude_damping(0.0, 24 * US)
    rho = random_density(2, np.random.default_rng(0))
    assert np.allclose(ch.apply(rho), rho)
    with pytest.raises(DomainError):
        amplitude_damping(-1e-9, 24 * US)
    with pytest.raises(InvalidRatesError):
        amplitude_damping(1e-9, 0.0)


def test_dephasing_rate_from_table_values():
    assert dephasing_rate(24 * US, 28 * US) == pytest.approx(1 / (67.2 * US), rel=1e-12)
    assert dephasing_rate(24 * US, 48 * US) == 0.0
    rho = np.full((2, 2), 0.5, dtype=complex)
    assert np.allclose(pure_dephasing(5 * US, 24 * US, 48 * US).apply(rho), rho)


def test_dephasing_half_life():
    gphi = dephasing_rate(24 * US, 28 * US)
    rho = np.full((2, 2), 0.5, dtype=complex)
    out = pure_dephasing(math.log(2) / gphi, 24 * US, 28 * US).apply(rho)
    assert abs(out[0, 1]) == pytest.approx(0.25, rel=1e-12)
    assert out[0, 0].real == pytest.approx(0.5)


def test_invalid_coherence_times():
    with pytest.raises(InvalidRatesError):
        pure_dephasing(1e-6, 10 * US, 25 * US)
    with pytest.raises(InvalidRatesError):
        DecoherenceRates(T1_q=10 * US, T2star_q=21 * US)
    with pytest.raises(InvalidRatesError):
        DecoherenceRates(thermal_q=0.6)
    with pytest.raises(DomainError):
        NoiseModel(scale=-0.1)


def test_kraus_completeness_is_enforced():
    with pytest.raises(DomainError):
        KrausChannel((np.eye(2) * 0.9,))


def test_zero_scale_is_ideal_unitary():
    rng = np.random.default_rng(2)
    circuit = AnsatzCircuit.create(2, rng.uniform(-3, 3, 14), bases="X")
    model = NoiseModel.ideal()
    for event in gate_schedule(circuit):
        ch = gate_noise_channel(event, model)
        u = np.eye(4) if event.unitary is None else event.unitary
        rho = random_density(4, rng)
        assert np.allclose(ch.apply(rho), u @ rho @ u.conj().T, atol=1e-12)


def test_scaled_transmon_decay_probability():
    model = NoiseModel(scale=2.2)
    t = GateDurations().q_rotation
    ch = gate_noise_channel(GateEvent(Q_ROT, t, np.eye(4)), model)
    # excite Q only and read back its population
    rho = np.zeros((4, 4), dtype=complex)
    rho[1, 1] = 1
    out = ch.apply(rho)
    p_q = out[0, 0].real + out[2, 2].real
    assert p_q == pytest.approx(1 - math.exp(-t / (24 * US / 2.2)), rel=1e-9)


def test_storage_rates_unscaled():
    t = 3 * US
    rho = np.zeros((4, 4), dtype=complex)
    rho[2, 2] = 1  # S excited, Q ground
    for c in (0.5, 1.0, 2.2):
        out = idle_channel(t, NoiseModel(scale=c)).apply(rho)
        assert out[0, 0].real == pytest.approx(1 - math.exp(-t / (740 * US)), rel=1e-9)


def test_random_channels_are_cptp():
    rng = np.random.default_rng(3)
    circuit = AnsatzCircuit.create(3, rng.uniform(-3, 3, 21), bases=("X", "Z", "X", "X"))
    for c in (0.3, 1.0, 2.2, 5.0):
        model = NoiseModel(scale=c, rates=DecoherenceRates(thermal_q=0.034))
        for event in gate_schedule(circuit):
            ch = gate_noise_channel(event, model)
            assert ch.completeness_error() <= 1e-12
            assert_valid_state(ch.apply(random_density(4, rng)))


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 50e-6), st.floats(0, 4), st.integers(0, 2**31 - 1))
def test_apply_idle_matches_kraus(t, c, seed):
    rng = np.random.default_rng(seed)
    model = NoiseModel(scale=c)
    ops = np.stack([random_density(4, rng), rng.normal(size=(4, 4)) + 0j])
    expected = np.stack([idle_channel(t, model).apply(x) for x in ops])
    assert np.allclose(apply_idle(ops, t, model), expected, atol=1e-13)


def test_apply_idle_fixed_durations():
    rng = np.random.default_rng(9)
    model = NoiseModel(scale=1.7)
    d = model.durations
    ops = rng.normal(size=(3, 4, 4)) + 1j * rng.normal(size=(3, 4, 4))
    for t in (d.q_rotation, d.s_gate, d.decode):
        expected = np.stack([idle_channel(t, model).apply(x) for x in ops])
        assert np.allclose(apply_idle(ops, t, model), expected, atol=1e-13)


def test_rate_time_equivalence():
    # storage made effectively noiseless so only the transmon factor remains
    rates = DecoherenceRates(T1_s=1e6, T2star_s=2e6)
    event = lambda t: GateEvent(Q_ROT, t, np.eye(4))  # noqa: E731
    for c, t in [(2.2, 40e-9), (0.5, 1.3 * US), (3.0, 0.529 * US)]:
        a = pauli_transfer_matrix(gate_noise_channel(event(t), NoiseModel(rates, scale=c)))
        b = pauli_transfer_matrix(gate_noise_channel(event(c * t), NoiseModel(rates, scale=1.0)))
        assert np.max(np.abs(a - b)) <= 1e-10


def test_injected_rate_examples():
    rate, ok = injected_rate(InjectionConfig(0.1, 1.0, GAMMA_R))
    assert rate == pytest.approx(1 / (6.8 * US), rel=1e-12)
    assert ok
    assert injected_rate(InjectionConfig(0.0, 1.0))[0] == 0.0
    assert injected_rate(InjectionConfig(1.0, 1.0))[1] is False


def test_drive_for_scale():
    rates = DecoherenceRates()
    omega_f0g1 = 0.25 * GAMMA_R
    omega = drive_for_scale(2.2, rates, omega_f0g1)
    rate, ok = injected_rate(InjectionConfig(omega, omega_f0g1))
    assert rate == pytest.approx(1 / (20 * US), rel=1e-10)
    assert ok
    assert drive_for_scale(1.0, rates, omega_f0g1) == 0.0
    with pytest.raises(DomainError):
        drive_for_scale(0.9, rates, omega_f0g1)


@settings(max_examples=50, deadline=None)
@given(st.floats(1, 10))
def test_drive_round_trip(c):
    rates = DecoherenceRates()
    omega = drive_for_scale(c, rates, 1e7)
    rate, _ = injected_rate(InjectionConfig(omega, 1e7))
    assert abs(rate - (c - 1) * rates.gamma1_q) <= 1e-10 * max(1.0, rates.gamma1_q * c)


def test_transient_closed_form_algebra():
    cfg = TransientLevelConfig(omega=0.5, gamma=1.0)
    assert cfg.closed_form_gamma1 == pytest.approx(0.5)


def test_transient_decay_weak_drive():
    gamma = 1.0
    cfg = TransientLevelConfig(omega=0.05 * gamma, gamma=gamma)
    fit = simulate_transient_decay(cfg)
    assert fit.gamma1 == pytest.approx(cfg.closed_form_gamma1, rel=0.05)
    assert fit.gamma2 == pytest.approx(cfg.adiabatic_gamma2, rel=0.05)


def test_transient_converges_to_adiabatic_limit():
    errs = []
    for ratio in (0.02, 0.1):
        cfg = TransientLevelConfig(omega=ratio, gamma=1.0)
        fit = simulate_transient_decay(cfg)
        errs.append(abs(fit.gamma1 - cfg.adiabatic_gamma1) / cfg.adiabatic_gamma1)
        if ratio == 0.02:
            assert fit.gamma2 / fit.gamma1 == pytest.approx(0.5, rel=0.05)
    assert errs[0] < errs[1]


def test_transient_strong_drive_is_not_exponential():
    # at Omega >> Gamma the population oscillates and the fit must refuse
    with pytest.raises(FitQualityError):
        simulate_transient_decay(TransientLevelConfig(omega=5.0, gamma=1.0))


def test_cascade_matches_injected_rate():
    cfg = CascadeConfig.from_ratio(0.05)
    rate, resid = simulate_cascade_decay(cfg)
    expected, ok = injected_rate(cfg.injection)
    assert ok
    assert rate == pytest.approx(expected, rel=0.05)
    assert resid < 1e-2


def test_ptm_self_fidelity():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    u, _ = np.linalg.qr(a)
    assert pauli_transfer_fidelity(KrausChannel.unitary(u), u) == pytest.approx(1.0, abs=1e-12)


def test_ptm_depolarizing():
    ops = tuple(0.5 * PAULI[k] for k in "IXYZ")
    ch = KrausChannel(ops)
    assert np.allclose(pauli_transfer_matrix(ch), np.diag([1, 0, 0, 0]), atol=1e-12)
    assert pauli_transfer_fidelity(ch, np.eye(2)) == pytest.approx(0.25, abs=1e-12)


def test_ptm_dimension_mismatch():
    with pytest.raises(DomainError):
        pauli_transfer_fidelity(KrausChannel.identity(4), np.eye(2))


def test_ptm_fidelity_decreases_with_scale():
    event = GateEvent(Q_ROT, 3 * US, np.eye(4))
    fids = [pauli_transfer_fidelity(gate_noise_channel(event, NoiseModel(scale=c)), np.eye(4)) for c in (1, 1.5, 2.2)]
    assert fids[0] > fids[1] > fids[2]


def test_reset_state_thermal():
    model = NoiseModel(rates=DecoherenceRates(thermal_q=0.034))
    assert np.allclose(model.reset_state(), np.diag([0.966, 0.034]))
    assert np.allclose(model.with_scale(0.0).reset_state(), np.diag([1, 0]))


def test_phase_damping_rejects_negative_rate():
    with pytest.raises(InvalidRatesError):
        phase_damping(1e-6, -1.0)
