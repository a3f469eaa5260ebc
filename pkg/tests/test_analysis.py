import math

import numpy as np
import pytest

from holopulse.analysis import (FidelityCurve, a2_robustness_map, band_stats, bandwidth_at,
                                compare_baselines, detuning_grid, khz_to_rad_per_us,
                                rad_per_us_to_khz, read_curves_csv, sweep_detuning,
                                write_contour_csv, write_curves_csv, write_map_csv)
from holopulse.gates import GateParams
from holopulse.pulses import OP1, square_envelope


def triangle_curve(slope=1e-4, half=500.0, n=101):
    d = np.linspace(-half, half, n)
    return FidelityCurve(d, 1.0 - slope * np.abs(d))


def test_unit_conversion():
    assert khz_to_rad_per_us(1000.0) == pytest.approx(2 * math.pi)
    assert rad_per_us_to_khz(khz_to_rad_per_us(123.4)) == pytest.approx(123.4)


def test_detuning_grid():
    g = detuning_grid(600, 121)
    assert g[60] == 0.0 and g[0] == -600 and g[-1] == 600
    with pytest.raises(ValueError):
        detuning_grid(600, 120)


def test_bandwidth_interpolates_edges():
    # F = 1 - |D|/10^4 crosses 0.99 at exactly +/-100 kHz
    lo, hi = bandwidth_at(triangle_curve(), 0.99)
    assert (lo, hi) == pytest.approx((-100.0, 100.0), abs=1e-9)


def test_bandwidth_stops_at_first_dip():
    d = np.linspace(-100, 100, 21)
    f = np.ones_like(d)
    f[15] = 0.5  # D = 50 dips, recovers after
    lo, hi = bandwidth_at(FidelityCurve(d, f), 0.99)
    assert lo == -100.0
    assert 40.0 < hi < 50.0


def test_bandwidth_requires_center_above_threshold():
    d = np.linspace(-10, 10, 5)
    with pytest.raises(ValueError):
        bandwidth_at(FidelityCurve(d, np.full(5, 0.5)), 0.99)


def test_band_stats_on_triangle():
    avg, worst = band_stats(triangle_curve(), 100.0)
    assert avg == pytest.approx(1.0 - 1e-4 * 50.0, abs=1e-12)
    assert worst == pytest.approx(0.99)


def test_curve_validation():
    with pytest.raises(ValueError):
        FidelityCurve(np.array([0.0, 2.0, 1.0]), np.ones(3))
    with pytest.raises(FloatingPointError):
        FidelityCurve(np.array([0.0, 1.0]), np.array([1.0, 1.1]))
    # round-off above 1 is clipped
    c = FidelityCurve(np.array([0.0, 1.0]), np.array([1.0 + 1e-12, 0.5]))
    assert c.fidelity.max() == 1.0


def test_sweep_symmetric_and_resonant(named_gate):
    c = sweep_detuning(named_gate, OP1, 600, 61)
    assert c.at(0.0) == pytest.approx(1.0, abs=1e-9)
    assert c.asymmetry() < 1e-9


def test_sweep_accepts_envelope_source():
    env = square_envelope(4.0)
    c = sweep_detuning(GateParams.sigma_x(), env, 200, 21)
    assert c.label == "square"
    assert c.at(0.0) == pytest.approx(1.0, abs=1e-9)


def test_compare_baselines_consistent(named_gate):
    curves = compare_baselines(named_gate, OP1, 600, 61)
    assert set(curves) == {"optimized", "gaussian", "square"}
    direct = sweep_detuning(named_gate, square_envelope(4.0), 600, 61)
    assert curves["square"].fidelity == pytest.approx(direct.fidelity, abs=1e-12)
    opt = bandwidth_at(curves["optimized"])[1]
    assert opt > bandwidth_at(curves["square"])[1]


def test_a2_map_invariants():
    rmap = a2_robustness_map(GateParams.hadamard(), OP1, n_eta=11, n_delta=41)
    assert rmap.fidelity.shape == (11, 41)
    assert np.max(np.abs(1.0 - rmap.zero_detuning_column())) < 1e-6
    assert rmap.contour and all(line.shape[1] == 2 for line in rmap.contour)
    nominal = sweep_detuning(GateParams.hadamard(), OP1, 600, 41)
    assert rmap.fidelity[5] == pytest.approx(nominal.fidelity, abs=1e-12)


def test_a2_map_contour_near_level():
    rmap = a2_robustness_map(GateParams.sigma_z(), OP1, n_eta=11, n_delta=41)
    # vertices interpolate between grid values straddling the level
    for line in rmap.contour:
        e, d = line[:, 0], line[:, 1]
        assert np.all(np.abs(e) <= 0.5 + 1e-12) and np.all(np.abs(d) <= 600 + 1e-9)


def test_csv_round_trip(tmp_path):
    curves = compare_baselines(GateParams.sigma_x(), OP1, 300, 31)
    path = tmp_path / "c.csv"
    write_curves_csv(list(curves.values()), path)
    back = read_curves_csv(path)
    for k, c in curves.items():
        assert back[k].fidelity == pytest.approx(c.fidelity, abs=1e-9)
    rmap = a2_robustness_map(GateParams.sigma_x(), OP1, n_eta=5, n_delta=11)
    write_map_csv(rmap, tmp_path / "m.csv")
    write_contour_csv(rmap, tmp_path / "k.csv")
    assert (tmp_path / "m.csv").read_text().count("\n") == 56
    assert (tmp_path / "k.csv").read_text().startswith("eta,delta_khz,segment")
