import math

import numpy as np
import pytest

from dsfq.circuit import CircuitSpec, CoupledSpec, Variant
from dsfq.evolve import (
    AlphaProfile,
    DrivePulse,
    PropagationError,
    PropagationSettings,
    TwoQubitFrame,
    propagate_state,
    propagate_subspace_unitary,
)
from dsfq.spectrum import qubit_eigensolution

SPEC = CircuitSpec(ej=10.0, ec=0.1, alpha=1.0, phi_ext=0.995 * math.pi, cutoff=12)
FAST = PropagationSettings(steps_per_ns=64, sample_interval_ns=0.5)


def q_node():
    return CircuitSpec(variant=Variant.NODE_BASIS, ej=10.0, ec=0.1, alpha=1.0,
                       phi_ext=0.99 * math.pi, cutoff=9)


# ---------------------------------------------------------------------------
# schedules and pulses


def test_profile_validation():
    with pytest.raises(PropagationError):
        AlphaProfile(((0.0, 1.0, 1.0, 0.7), (1.5, 2.0, 0.7, 1.0)))  # gap
    with pytest.raises(PropagationError):
        AlphaProfile(((0.0, 1.0, 1.0, 0.3),))  # below range
    with pytest.raises(PropagationError):
        AlphaProfile(((1.0, 1.0, 1.0, 1.0),))  # zero length
    prof = AlphaProfile.single_qubit()
    assert prof.duration == pytest.approx(25.0)
    assert prof.is_gate_schedule()
    assert prof.alpha(0.0) == 1.0
    assert prof.alpha(10.0) == pytest.approx(0.7)
    assert prof.alpha(25.0) == 1.0


def test_two_qubit_profile_alpha_min():
    prof = AlphaProfile.two_qubit(70.0, 5.0)
    assert prof.alpha_min == pytest.approx(0.5)
    assert prof.duration == pytest.approx(75.0)
    with pytest.raises(PropagationError):
        AlphaProfile.two_qubit(90.0, 0.0)


def test_pulse_envelope_and_area():
    pulse = DrivePulse(amplitude=0.2, carrier_freq=0.4, ramp_ns=1.5, flat_ns=8.0,
                       t_start=7.0)
    assert pulse.envelope(7.0) == 0.0
    assert pulse.envelope(7.0 + 1.5) == pytest.approx(0.2)
    assert pulse.envelope(12.0) == pytest.approx(0.2)
    assert pulse.envelope(18.0) == 0.0
    ts = np.linspace(6.9, 18.1, 20001)
    area = np.trapezoid([pulse.envelope(t) for t in ts], ts)
    assert area == pytest.approx(pulse.envelope_area(), rel=1e-4)


def test_settings_validation():
    with pytest.raises(PropagationError):
        PropagationSettings(steps_per_ns=20)
    with pytest.raises(PropagationError):
        PropagationSettings(method="magic")


# ---------------------------------------------------------------------------
# single-circuit propagation


def test_stationary_state_is_stationary():
    sol = qubit_eigensolution(SPEC, 3)
    traj = propagate_state(SPEC, AlphaProfile.constant(1.0, 4.0), None,
                           sol.state(0), FAST)
    for state in traj.states:
        assert abs(abs(np.vdot(sol.state(0), state)) - 1.0) < 1e-8


def test_ramp_leakage_and_transition_scales():
    # 7 ns ramp 1 -> 0.7: leakage ~ 1e-4, inter-level transition ~ 1e-3
    sol = qubit_eigensolution(SPEC, 3)
    prof = AlphaProfile(((0.0, 7.0, 1.0, 0.7),))
    traj = propagate_state(SPEC, prof, None, sol.state(0), FAST)
    w = traj.spectral_weights[-1]
    transition = w[1]
    leak = 1.0 - w[0] - w[1]
    assert 1e-3 / 3 < transition < 1e-3 * 3
    assert 1e-4 / 3 < leak < 1e-4 * 3


def test_step_doubling_convergence():
    sol = qubit_eigensolution(SPEC, 3)
    prof = AlphaProfile.single_qubit()
    pulse = DrivePulse(amplitude=0.05, carrier_freq=0.38)
    t1 = propagate_state(SPEC, prof, pulse, sol.state(0),
                         PropagationSettings(steps_per_ns=64, sample_interval_ns=5.0))
    t2 = propagate_state(SPEC, prof, pulse, sol.state(0),
                         PropagationSettings(steps_per_ns=128, sample_interval_ns=5.0))
    deviation = np.linalg.norm(t1.final - t2.final)
    assert deviation < 1e-6


def test_integrator_agrees_with_exponential():
    sol = qubit_eigensolution(SPEC, 3)
    prof = AlphaProfile(((0.0, 2.0, 1.0, 0.9),))
    a = propagate_state(SPEC, prof, None, sol.state(0),
                        PropagationSettings(steps_per_ns=512, sample_interval_ns=1.0))
    b = propagate_state(SPEC, prof, None, sol.state(0),
                        PropagationSettings(steps_per_ns=512, sample_interval_ns=1.0,
                                            method="integrator"))
    assert np.linalg.norm(a.final - b.final) < 1e-7


def test_time_reversal_round_trip():
    # adiabatic down-and-up returns the computational states to themselves
    sol = qubit_eigensolution(SPEC, 3)
    prof = AlphaProfile(((0.0, 7.0, 1.0, 0.7), (7.0, 14.0, 0.7, 1.0)))
    for j in (0, 1):
        traj = propagate_state(SPEC, prof, None, sol.state(j), FAST)
        overlap = abs(np.vdot(sol.state(j), traj.final))
        assert 1.0 - overlap < 1e-3  # population return; phase is dynamical


def test_spectral_weights_sum_to_one():
    sol = qubit_eigensolution(SPEC, 3)
    prof = AlphaProfile.single_qubit()
    traj = propagate_state(SPEC, prof, None, sol.state(0),
                           PropagationSettings(steps_per_ns=64, sample_interval_ns=1.0,
                                               spectral_k=10))
    sums = traj.spectral_weights.sum(axis=1)
    assert sums.min() > 1.0 - 1e-6


def test_norm_is_preserved():
    sol = qubit_eigensolution(SPEC, 3)
    pulse = DrivePulse(amplitude=0.17, carrier_freq=0.387)
    traj = propagate_state(SPEC, AlphaProfile.single_qubit(), pulse, sol.state(1), FAST)
    assert np.abs(traj.norms - 1.0).max() < 1e-8


def test_initial_state_validation():
    with pytest.raises(PropagationError):
        propagate_state(SPEC, AlphaProfile.constant(1.0, 1.0), None,
                        np.ones(SPEC.basis.dim), FAST)


# ---------------------------------------------------------------------------
# two-qubit moving frame


@pytest.fixture(scope="module")
def coupled_frame():
    cpl = CoupledSpec(q_node(), q_node(), cg_ratio=0.3)
    settings = PropagationSettings(steps_per_ns=286, sample_interval_ns=2.0,
                                   alpha_grid=1e-3)
    frame = TwoQubitFrame(cpl, settings)
    frame.ensure_range(0.78)
    return cpl, settings, frame


def test_constant_alpha_unitary_is_diagonal_phases(coupled_frame):
    cpl, settings, frame = coupled_frame
    traj = propagate_subspace_unitary(cpl, AlphaProfile.constant(1.0, 2.5),
                                      settings, frame=frame)
    u = traj.final
    node = frame.node(1.0)
    expected = np.exp(-2j * math.pi * node["e"] * 2.5)
    assert np.abs(u - np.diag(np.diag(u))).max() < 1e-10
    assert np.abs(np.diag(u) - expected).max() < 1e-9


def test_unitarity_at_samples(coupled_frame):
    cpl, settings, frame = coupled_frame
    traj = propagate_subspace_unitary(cpl, AlphaProfile.two_qubit(28.0, 2.0),
                                      settings, frame=frame)
    for u in traj.states:
        assert np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() < 1e-8


def test_two_qubit_round_trip_identity(coupled_frame):
    # no-wait trapezoid: computational block returns near identity
    cpl, settings, frame = coupled_frame
    traj = propagate_subspace_unitary(cpl, AlphaProfile.two_qubit(20.0, 0.0),
                                      settings, frame=frame)
    proj = frame.computational_projector(frame.node(1.0))
    u = proj.conj().T @ traj.final @ proj
    populations = np.abs(u) ** 2
    assert populations.diagonal().min() > 1.0 - 1e-3


def test_two_qubit_step_doubling(coupled_frame):
    cpl, settings, frame = coupled_frame
    prof = AlphaProfile.two_qubit(24.0, 1.0)
    import dataclasses
    t1 = propagate_subspace_unitary(cpl, prof, settings, frame=frame)
    s2 = dataclasses.replace(settings, steps_per_ns=572)
    t2 = propagate_subspace_unitary(cpl, prof, s2, frame=frame)
    assert np.abs(t1.final - t2.final).max() < 1e-5
