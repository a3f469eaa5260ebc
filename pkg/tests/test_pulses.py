import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import brentq, minimize_scalar

from holopulse.gates import GateParams
from holopulse.pulses import (COMPENSATION_PAIR, GATE_PAIR, OP1, OP2, ConstraintSet,
                              CosineEnvelope, PulseSequence, build_sequence, constraint_residuals,
                              envelope_from_dict, gaussian_envelope, get_preset, lift_free_dofs,
                              measure_fwhm, project_free_dofs, pulse_area, square_envelope)

free_vectors = st.lists(st.floats(-2.0, 2.0), min_size=6, max_size=6)


def omega_reference(t, coeffs, T, area=math.pi):
    # written out term by term, independent of the vectorized envelope
    total = area / T
    for n, a in enumerate(coeffs, start=1):
        total += a * n * math.pi / T * math.cos(n * math.pi * t / T)
    return total


# residuals worked by hand: odd sum a1+3a3+5a5+7a7, even sum a2+2a4+3a6+4a8 + 1/2
@pytest.mark.parametrize("row, odd, even", [(OP1, 0.0003, -0.0002), (OP2, 0.0004, 0.0002)])
def test_published_rows_residuals(row, odd, even):
    r = constraint_residuals(row, GATE_PAIR)
    assert r[0] == pytest.approx(odd, abs=1e-12)
    assert r[1] == pytest.approx(even, abs=1e-12)


def test_envelope_matches_reference_formula():
    env = CosineEnvelope(4.0, math.pi, OP1)
    t = np.linspace(0, 4, 37)
    assert env(t) == pytest.approx([omega_reference(x, OP1, 4.0) for x in t], abs=1e-13)


def test_domain_checked():
    env = CosineEnvelope(4.0)
    with pytest.raises(ValueError):
        env(4.1)
    with pytest.raises(ValueError):
        env(-0.01)


@given(free_vectors)
def test_lift_satisfies_constraints_and_projects_back(free):
    for cset in (GATE_PAIR, COMPENSATION_PAIR):
        a = lift_free_dofs(free, cset)
        assert max(map(abs, constraint_residuals(a, cset))) < 1e-12
        assert project_free_dofs(a, cset) == pytest.approx(free)


@given(free_vectors)
def test_lifted_envelope_has_zero_edges_and_fixed_area(free):
    a = lift_free_dofs(free, GATE_PAIR)
    assert omega_reference(0.0, a, 4.0) == pytest.approx(0.0, abs=1e-11)
    assert omega_reference(4.0, a, 4.0) == pytest.approx(0.0, abs=1e-11)
    area, _ = quad(omega_reference, 0.0, 4.0, args=(a, 4.0), limit=200)
    assert area == pytest.approx(math.pi, abs=1e-9)
    assert pulse_area(CosineEnvelope(4.0, math.pi, a)) == pytest.approx(math.pi, abs=1e-9)


def test_constraint_set_for_area():
    assert ConstraintSet.for_area(2 * math.pi) == COMPENSATION_PAIR
    assert GATE_PAIR.n_free == 6
    with pytest.raises(ValueError):
        lift_free_dofs(np.zeros(5))


def test_build_sequence_rejects_unconstrained_rows():
    with pytest.raises(ValueError, match="constraint"):
        build_sequence(GateParams.sigma_x(), np.ones(8))


def test_compensation_pair_is_doubled_envelope():
    seq = build_sequence(GateParams.hadamard(), OP1)
    t = np.linspace(0, 4, 101)
    assert seq.pair2.envelope(t) == pytest.approx(2 * seq.pair1.envelope(t), abs=1e-12)
    assert pulse_area(seq.pair2.envelope) == pytest.approx(2 * math.pi, abs=1e-9)
    assert seq.pair2.params.theta == pytest.approx(3 * math.pi / 4)
    assert seq.t2 == pytest.approx(8.0)


def test_fields_use_gate_amplitudes():
    g = GateParams(math.pi / 3, 0.7)
    seq = build_sequence(g, OP1)
    t = np.array([1.3, 2.0])
    o1, o0 = seq.fields(t)
    om = seq.pair1.envelope(t)
    assert o1 == pytest.approx(-2 * math.cos(math.pi / 6) * om)
    assert o0 == pytest.approx(2 * math.sin(math.pi / 6) * om * np.exp(-0.7j))
    # second pair: (pi - theta, pi + phi) on the doubled envelope
    o1b, o0b = seq.fields(np.array([5.3]))
    assert o1b[0] == pytest.approx(-2 * math.cos((math.pi - math.pi / 3) / 2) * 2 * om[0])


def test_gaussian_and_square_areas():
    g = gaussian_envelope(4.0, 0.8, math.pi)
    area, _ = quad(g, 0.0, 4.0, points=[2.0])
    assert area == pytest.approx(math.pi, rel=1e-10)
    assert measure_fwhm(g).width == pytest.approx(0.8, abs=1e-9)
    s = square_envelope(4.0)
    assert s(np.array([0.0, 2.0, 4.0])) == pytest.approx([math.pi / 4] * 3)
    assert measure_fwhm(s).width == pytest.approx(4.0)


def test_op1_fwhm_against_root_finder():
    env = CosineEnvelope(4.0, math.pi, OP1)
    peak = minimize_scalar(lambda t: -env(t), bounds=(1.0, 3.0), method="bounded",
                           options={"xatol": 1e-12})
    half = -0.5 * peak.fun
    left = brentq(lambda t: env(t) - half, 0.5, peak.x, xtol=1e-14)
    right = brentq(lambda t: env(t) - half, peak.x, 3.5, xtol=1e-14)
    w = measure_fwhm(env)
    assert w.width == pytest.approx(right - left, abs=1e-8)
    assert w.width == pytest.approx(0.78592, abs=1e-5)
    assert not w.multimodal


def test_sequence_dict_round_trip():
    seq = build_sequence(GateParams.sigma_y(), OP2)
    back = PulseSequence.from_dict(seq.to_dict())
    t = np.linspace(0, 8, 17)
    for a, b in zip(seq.fields(t), back.fields(t)):
        assert np.array_equal(a, b)
    assert envelope_from_dict(gaussian_envelope(4.0, 1.0).to_dict()).fwhm == 1.0


def test_presets():
    assert get_preset("OP1") == pytest.approx(OP1)
    with pytest.raises(ValueError):
        get_preset("op3")


def test_peak_rabi_values():
    # 2 * max|Omega| / 2pi, checked against a dense independent evaluation
    for row in (OP1, OP2):
        t = np.linspace(0, 4, 400001)
        ref = 2 * max(abs(omega_reference(x, row, 4.0)) for x in t[::100])
        seq = build_sequence(GateParams.sigma_x(), row)
        assert seq.peak_rabi(1) == pytest.approx(ref, rel=1e-4)
