import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from holopulse.analysis import khz_to_rad_per_us
from holopulse.dynamics import (IntegratorResolutionError, SimConfig, ThreeLevelState, auto_steps,
                                dark_state_invariance_check, derivative, fidelity, hamiltonian,
                                propagate, propagate_batch, write_trace_csv)
from holopulse.gates import GateParams, QubitState, target_state
from holopulse.pulses import OP1, OP2, build_sequence


def reference_final(seq, initial, delta):
    """Adaptive high-order integration of the same equations of motion."""

    def rhs(t, y):
        psi = y[:3] + 1j * y[3:]
        o1, o0 = seq.fields(np.array([t]))
        h = hamiltonian(o1[0], o0[0], delta)
        d = -1j * h @ psi
        return np.concatenate([d.real, d.imag])

    psi0 = np.array([initial.c1, initial.c0, 0.0], dtype=complex)
    y = np.concatenate([psi0.real, psi0.imag])
    for a, b in ((0.0, seq.t1), (seq.t1, seq.t2)):
        y = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=1e-12, atol=1e-13).y[:, -1]
    return y[:3] + 1j * y[3:]


@pytest.mark.parametrize("state, o1, o0, delta, expected", [
    ((1, 0, 0), 2.0, 0.0, 0.0, (0, 0, -1j)),
    ((0, 1, 0), 0.0, 2j, 0.0, (0, 0, -1)),
    ((0, 0, 1), 2.0, 4.0, 3.0, (-1j, -2j, -3j)),
])
def test_derivative_examples(state, o1, o0, delta, expected):
    d = derivative(ThreeLevelState(*state), o1, o0, delta)
    assert d.vector == pytest.approx(np.array(expected, dtype=complex))


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_generator_hermitian(o1, re0, im0, delta):
    h = hamiltonian(o1, complex(re0, im0), delta)
    assert np.allclose(h, h.conj().T, atol=0)


def test_resonant_sigma_x_populations():
    res = propagate(build_sequence(GateParams.sigma_x(), OP1), QubitState.one())
    assert res.final.populations == pytest.approx((0.0, 1.0, 0.0), abs=1e-9)
    assert res.norm_drift < 1e-8
    assert res.times[0] == 0.0 and res.times[-1] == 8.0
    assert res.populations.shape == (8001, 3)


def test_hadamard_final_populations():
    res = propagate(build_sequence(GateParams.hadamard(), OP1), QubitState.one())
    p1, p0, pe = res.final.populations
    assert (p1, p0) == pytest.approx((0.5, 0.5), abs=1e-6)
    assert pe < 1e-9


@pytest.mark.parametrize("khz", [0.0, 250.0, -600.0])
def test_matches_adaptive_reference(named_gate, khz):
    seq = build_sequence(named_gate, OP1)
    initial = QubitState.from_angles(0.4, 1.1)
    delta = float(khz_to_rad_per_us(khz))
    ours = propagate(seq, initial, SimConfig(4000, delta)).final.vector
    ref = reference_final(seq, initial, delta)
    assert np.max(np.abs(ours - ref)) < 1e-8


def test_step_halving_and_norm_op2():
    seq = build_sequence(GateParams.hadamard(), OP2)
    initial = QubitState.one()
    deltas = khz_to_rad_per_us([-600.0, 0.0, 600.0])
    steps = auto_steps(seq, float(deltas.max()))
    a, drift = propagate_batch(seq, initial, deltas, steps)
    b, _ = propagate_batch(seq, initial, deltas, 2 * steps)
    target = target_state(initial, GateParams.hadamard())
    assert np.max(drift) < 1e-8
    assert np.max(np.abs(fidelity(a, target) - fidelity(b, target))) < 1e-8


def test_resolution_error_names_suggestion():
    seq = build_sequence(GateParams.sigma_x(), OP2)
    with pytest.raises(IntegratorResolutionError) as info:
        propagate(seq, QubitState.one(), SimConfig(500))
    assert info.value.suggested > 500


@given(st.complex_numbers(max_magnitude=1.0), st.complex_numbers(max_magnitude=1.0))
def test_linearity(alpha, beta):
    seq = build_sequence(GateParams(1.1, 0.4), OP1)
    delta = float(khz_to_rad_per_us(300.0))
    zero = propagate_batch(seq, QubitState.zero(), np.array([delta]), 400, norm_ceiling=1.0)[0][0]
    one = propagate_batch(seq, QubitState.one(), np.array([delta]), 400, norm_ceiling=1.0)[0][0]
    norm = math.sqrt(abs(alpha) ** 2 + abs(beta) ** 2)
    if norm < 1e-3:
        return
    mix = QubitState(alpha / norm, beta / norm)
    got = propagate_batch(seq, mix, np.array([delta]), 400, norm_ceiling=1.0)[0][0]
    assert np.max(np.abs(got - (alpha * zero + beta * one) / norm)) < 1e-9


def test_batch_matches_single_runs():
    seqs = [build_sequence(GateParams.sigma_x(), OP1), build_sequence(GateParams.hadamard(), OP1)]
    deltas = khz_to_rad_per_us([100.0, -200.0])
    batch, _ = propagate_batch(seqs, QubitState.one(), deltas, 4000, seq_index=np.array([0, 1]))
    for i in range(2):
        single = propagate(seqs[i], QubitState.one(), SimConfig(4000, deltas[i])).final.vector
        assert np.max(np.abs(batch[i] - single)) < 1e-14


def test_dark_state_invariance(named_gate):
    rep = dark_state_invariance_check(build_sequence(named_gate, OP1))
    assert rep.dark_overlap == pytest.approx(1.0, abs=1e-6)
    assert rep.bright_amplitude == pytest.approx(-1.0, abs=1e-6)
    assert rep.superposition_fidelity == pytest.approx(1.0, abs=1e-6)


def test_fidelity_counts_excited_leakage():
    target = QubitState.one()
    assert fidelity(np.array([1.0, 0.0, 0.0]), target) == pytest.approx(1.0)
    leaked = np.array([math.sqrt(0.5), 0.0, math.sqrt(0.5)])
    assert fidelity(leaked, target) == pytest.approx(0.5)


def test_trace_csv(tmp_path):
    res = propagate(build_sequence(GateParams.sigma_z(), OP1), QubitState.one(), SimConfig(100, 0.0, 1.0))
    path = tmp_path / "trace.csv"
    write_trace_csv(res, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t_us,p1,p0,pe"
    assert len(lines) == 202
