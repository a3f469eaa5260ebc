"""Detuning sweeps, baseline comparison and the a2-perturbation map."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .dynamics import auto_steps, fidelity, propagate_batch
from .gates import GateParams, QubitState, target_state
from .pulses import (DEFAULT_T1, PI, PulsePair, PulseSequence, build_sequence,
                     gaussian_envelope, measure_fwhm, square_envelope)

KHZ = 2.0 * math.pi / 1000.0  # rad/us per kHz
_F_SLACK = 1e-9


def khz_to_rad_per_us(khz):
    return np.asarray(khz, dtype=float) * KHZ


def rad_per_us_to_khz(delta):
    return np.asarray(delta, dtype=float) / KHZ


def _checked_fidelity(f):
    f = np.asarray(f, dtype=float)
    if np.any(f < -_F_SLACK) or np.any(f > 1.0 + _F_SLACK):
        raise FloatingPointError(
            f"fidelity outside [0, 1] beyond round-off: [{f.min()!r}, {f.max()!r}]"
        )
    return np.clip(f, 0.0, 1.0)


@dataclass
class FidelityCurve:
    delta_khz: np.ndarray
    fidelity: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.delta_khz = np.asarray(self.delta_khz, dtype=float)
        self.fidelity = _checked_fidelity(self.fidelity)
        if self.delta_khz.shape != self.fidelity.shape or self.delta_khz.ndim != 1:
            raise ValueError("delta and fidelity must be 1-D arrays of equal length")
        steps = np.diff(self.delta_khz)
        degenerate = np.all(self.delta_khz == self.delta_khz[0])
        if not degenerate and np.any(steps <= 0):
            raise ValueError("detuning axis must be strictly increasing")

    @property
    def label(self) -> str:
        return str(self.meta.get("label", ""))

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.delta_khz.tolist(), self.fidelity.tolist()))

    def at(self, delta_khz: float) -> float:
        return float(np.interp(delta_khz, self.delta_khz, self.fidelity))

    def asymmetry(self) -> float:
        """``max |F(D) - F(-D)|`` over the sampled range (by interpolation)."""
        mirrored = np.interp(-self.delta_khz, self.delta_khz, self.fidelity)
        return float(np.max(np.abs(self.fidelity - mirrored)))


def _sequence_for(gate: GateParams, source, t1: float, t2):
    if callable(source) and hasattr(source, "duration"):
        return PulseSequence.from_envelope(gate, source, t2)
    return build_sequence(gate, source, t1, t2)


def sweep_sequences(sequences, gate: GateParams, delta_khz, initial: QubitState,
                    steps_per_pair: int | None = None, seq_index=None):
    """Fidelities for every (sequence, detuning) pair in one batched run."""
    if isinstance(sequences, PulseSequence):
        sequences = [sequences]
    delta_khz = np.asarray(delta_khz, dtype=float)
    deltas = khz_to_rad_per_us(delta_khz)
    if steps_per_pair is None:
        dmax = float(np.max(np.abs(deltas))) if deltas.size else 0.0
        steps_per_pair = max(auto_steps(s, dmax) for s in sequences)
    finals, _ = propagate_batch(sequences, initial, deltas, steps_per_pair, seq_index=seq_index)
    return _checked_fidelity(fidelity(finals, target_state(initial, gate)))


def detuning_grid(delta_max_khz: float, n_points: int) -> np.ndarray:
    if n_points < 3 or n_points % 2 == 0:
        raise ValueError("n_points must be odd and >= 3 so that zero detuning is sampled")
    if delta_max_khz < 0:
        raise ValueError("delta_max_khz must be non-negative")
    grid = np.linspace(-delta_max_khz, delta_max_khz, n_points)
    grid[n_points // 2] = 0.0
    return grid


def sweep_detuning(gate: GateParams, source, delta_max_khz: float = 600.0, n_points: int = 121,
                   t1: float = DEFAULT_T1, t2: float | None = None,
                   initial: QubitState | None = None, steps_per_pair: int | None = None,
                   label: str | None = None) -> FidelityCurve:
    """Fidelity versus detuning on a symmetric grid ``[-max, +max]`` (kHz).

    ``source`` is a coefficient vector (checked against the edge constraints)
    or any envelope object, which is used as-is for the gate pair.
    """
    initial = QubitState.one() if initial is None else initial
    seq = _sequence_for(gate, source, t1, t2)
    grid = detuning_grid(delta_max_khz, n_points)
    f = sweep_sequences(seq, gate, grid, initial, steps_per_pair)
    meta = {"gate": [gate.theta, gate.phi], "envelope": seq.pair1.envelope.kind,
            "label": label or seq.pair1.envelope.kind}
    return FidelityCurve(grid, f, meta)


def bandwidth_at(curve: FidelityCurve, threshold: float = 0.99) -> tuple[float, float]:
    """Widest contiguous interval around zero detuning with ``F >= threshold``.

    Edges are linearly interpolated between the bracketing samples; a curve
    that never drops below ``threshold`` returns the full swept range.
    """
    x, f = curve.delta_khz, curve.fidelity
    zero = np.flatnonzero(x == 0.0)
    if zero.size == 0:
        raise ValueError("curve does not sample zero detuning")
    i0 = int(zero[0])
    if f[i0] < threshold:
        raise ValueError(f"F(0) = {f[i0]:.6g} is below the threshold {threshold}")

    def edge(step):
        i = i0
        while 0 <= i + step < x.size and f[i + step] >= threshold:
            i += step
        j = i + step
        if j < 0 or j >= x.size:
            return float(x[i])
        # f[i] >= threshold > f[j]
        frac = (f[i] - threshold) / (f[i] - f[j])
        return float(x[i] + frac * (x[j] - x[i]))

    return edge(-1), edge(+1)


def band_stats(curve: FidelityCurve, half_width_khz: float) -> tuple[float, float]:
    """Trapezoid band-average and minimum of ``F`` over ``|D| <= half_width``."""
    x, f = curve.delta_khz, curve.fidelity
    lo, hi = -half_width_khz, half_width_khz
    if x[0] > lo + 1e-9 or x[-1] < hi - 1e-9:
        raise ValueError("band exceeds the swept range")
    inside = (x > lo) & (x < hi)
    xs = np.concatenate([[lo], x[inside], [hi]])
    fs = np.concatenate([[curve.at(lo)], f[inside], [curve.at(hi)]])
    if hi == lo:
        return float(fs[0]), float(fs.min())
    return float(trapezoid(fs, xs) / (hi - lo)), float(fs.min())


def baseline_envelopes(coeffs, t1: float = DEFAULT_T1):
    """Cosine envelope plus Gaussian (same t_fwhm) and square (same duration)."""
    cos_env = build_sequence(GateParams(0.0), coeffs, t1).pair1.envelope
    width = measure_fwhm(cos_env).width
    return {
        "optimized": cos_env,
        "gaussian": gaussian_envelope(t1, width, PI),
        "square": square_envelope(t1, PI),
    }


def compare_baselines(gate: GateParams, coeffs, delta_max_khz: float = 600.0,
                      n_points: int = 121, t1: float = DEFAULT_T1,
                      initial: QubitState | None = None,
                      steps_per_pair: int | None = None) -> dict[str, FidelityCurve]:
    initial = QubitState.one() if initial is None else initial
    envs = baseline_envelopes(coeffs, t1)
    seqs = [PulseSequence.from_envelope(gate, e) for e in envs.values()]
    grid = detuning_grid(delta_max_khz, n_points)
    idx = np.repeat(np.arange(len(seqs)), grid.size)
    f = sweep_sequences(seqs, gate, np.tile(grid, len(seqs)), initial, steps_per_pair, idx)
    f = f.reshape(len(seqs), grid.size)
    return {
        name: FidelityCurve(grid, f[i], {"gate": [gate.theta, gate.phi], "envelope": env.kind,
                                         "label": name})
        for i, (name, env) in enumerate(envs.items())
    }


@dataclass
class RobustnessMap:
    eta: np.ndarray
    delta_khz: np.ndarray
    fidelity: np.ndarray  # (n_eta, n_delta)
    contour: list = field(default_factory=list)  # polylines of (eta, delta_khz)
    level: float = 0.99

    def __post_init__(self):
        self.fidelity = _checked_fidelity(self.fidelity)
        if self.fidelity.shape != (self.eta.size, self.delta_khz.size):
            raise ValueError("grid shape does not match the axes")

    def zero_detuning_column(self) -> np.ndarray:
        j = int(np.argmin(np.abs(self.delta_khz)))
        return self.fidelity[:, j]

    def min_in_rectangle(self, eta_lim: float, delta_lim_khz: float) -> float:
        rows = np.abs(self.eta) <= eta_lim + 1e-12
        cols = np.abs(self.delta_khz) <= delta_lim_khz + 1e-9
        return float(self.fidelity[np.ix_(rows, cols)].min())


def level_contours(grid: np.ndarray, x_axis: np.ndarray, y_axis: np.ndarray, level: float):
    """Marching-squares iso-lines of ``grid[i, j]`` mapped onto the axes."""
    from skimage.measure import find_contours

    lines = []
    for path in find_contours(grid, level):
        rows, cols = path[:, 0], path[:, 1]
        lines.append(np.column_stack([
            np.interp(rows, np.arange(x_axis.size), x_axis),
            np.interp(cols, np.arange(y_axis.size), y_axis),
        ]))
    return lines


def a2_robustness_map(gate: GateParams, coeffs, eta_max: float = 0.5,
                      delta_max_khz: float = 600.0, n_eta: int = 41, n_delta: int = 121,
                      t1: float = DEFAULT_T1, initial: QubitState | None = None,
                      steps_per_pair: int | None = None, level: float = 0.99,
                      perturb_compensation: bool = False) -> RobustnessMap:
    """Fidelity over (fractional a2 change, detuning).

    Each row replaces the gate pair's ``a2`` by ``(1 + eta) * a2`` with every
    other coefficient fixed, and leaves the edge constraints broken. The
    compensation pair has its own coefficients and stays at its nominal
    ``2 * Omega(t)`` unless ``perturb_compensation`` is set, in which case it
    is twice the perturbed envelope.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.size < 2 or coeffs[1] == 0.0:
        raise ValueError("a2 must be present and nonzero")
    initial = QubitState.one() if initial is None else initial
    nominal = build_sequence(gate, coeffs, t1)
    etas = np.linspace(-eta_max, eta_max, n_eta)
    if n_eta % 2:
        etas[n_eta // 2] = 0.0
    grid = detuning_grid(delta_max_khz, n_delta)
    seqs = []
    for e in etas:
        env = nominal.pair1.envelope.with_coeff(2, (1.0 + e) * coeffs[1])
        if perturb_compensation:
            seqs.append(PulseSequence.from_envelope(gate, env))
        else:
            seqs.append(PulseSequence(PulsePair(env, gate, "gate"), nominal.pair2,
                                      nominal.t1, nominal.t2))
    idx = np.repeat(np.arange(n_eta), n_delta)
    f = sweep_sequences(seqs, gate, np.tile(grid, n_eta), initial, steps_per_pair, idx)
    f = f.reshape(n_eta, n_delta)
    return RobustnessMap(etas, grid, f, level_contours(f, etas, grid, level), level)


# --------------------------------------------------------------------------
# CSV output
# --------------------------------------------------------------------------


def _g(x) -> str:
    return f"{float(x):.9g}"


def write_curves_csv(curves, path) -> None:
    """``delta_khz, fidelity, label`` rows, one block per curve."""
    if isinstance(curves, FidelityCurve):
        curves = [curves]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delta_khz", "fidelity", "label"])
        for c in curves:
            for d, f in zip(c.delta_khz, c.fidelity):
                w.writerow([_g(d), _g(f), c.label])


def read_curves_csv(path) -> dict[str, FidelityCurve]:
    rows: dict[str, list] = {}
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            rows.setdefault(r["label"], []).append((float(r["delta_khz"]), float(r["fidelity"])))
    return {k: FidelityCurve(*map(np.array, zip(*v)), {"label": k}) for k, v in rows.items()}


def write_map_csv(rmap: RobustnessMap, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eta", "delta_khz", "fidelity"])
        for i, e in enumerate(rmap.eta):
            for j, d in enumerate(rmap.delta_khz):
                w.writerow([_g(e), _g(d), _g(rmap.fidelity[i, j])])


def write_contour_csv(rmap: RobustnessMap, path) -> None:
    """Contour vertices as ``eta, delta_khz``; ``segment`` numbers each polyline."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eta", "delta_khz", "segment"])
        for k, line in enumerate(rmap.contour):
            for e, d in line:
                w.writerow([_g(e), _g(d), k])
