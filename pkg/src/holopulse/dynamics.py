"""Detuned three-level Lambda dynamics.

Amplitudes are ordered ``(C1, C0, Ce)`` and obey::

    dC1/dt = -(i/2) Omega1  Ce
    dC0/dt = -(i/2) Omega0  Ce
    dCe/dt = -(i/2) Omega1  C1 - (i/2) conj(Omega0) C0 - i Delta Ce

with fields in rad/us, time in us and ``Delta`` in rad/us. Integration is
classical fixed-step RK4 with fields evaluated analytically at every stage
time. The stepping kernel is compiled with numba and batched over detunings
(and, optionally, over different pulse sequences).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numba
import numpy as np

from .gates import QubitState, dark_bright
from .pulses import PulsePair, PulseSequence

DEFAULT_STEPS = 4000
DEFAULT_NORM_CEILING = 1e-8


class IntegratorResolutionError(RuntimeError):
    """Raised when RK4 norm drift exceeds the configured ceiling."""

    def __init__(self, drift, ceiling, steps, suggested, delta=None):
        self.drift = drift
        self.ceiling = ceiling
        self.steps = steps
        self.suggested = suggested
        self.delta = delta
        where = "" if delta is None else f" at detuning {delta:.6g} rad/us"
        super().__init__(
            f"norm drift {drift:.3e} exceeds ceiling {ceiling:.1e}{where} with "
            f"{steps} steps per pair; increase steps_per_pair to at least {suggested}"
        )


@dataclass(frozen=True)
class ThreeLevelState:
    c1: complex
    c0: complex
    ce: complex = 0j

    @classmethod
    def from_qubit(cls, q: QubitState) -> "ThreeLevelState":
        return cls(q.c1, q.c0, 0j)

    @classmethod
    def from_vector(cls, vec) -> "ThreeLevelState":
        c1, c0, ce = np.asarray(vec, dtype=complex).reshape(3)
        return cls(complex(c1), complex(c0), complex(ce))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.c1, self.c0, self.ce], dtype=complex)

    @property
    def populations(self) -> tuple[float, float, float]:
        return abs(self.c1) ** 2, abs(self.c0) ** 2, abs(self.ce) ** 2

    @property
    def norm2(self) -> float:
        return float(sum(self.populations))

    def qubit_part(self) -> np.ndarray:
        """Unnormalized ``(c0, c1)`` projection onto the qubit subspace."""
        return np.array([self.c0, self.c1], dtype=complex)


@dataclass(frozen=True)
class SimConfig:
    steps_per_pair: int = DEFAULT_STEPS
    detuning: float = 0.0
    norm_ceiling: float = DEFAULT_NORM_CEILING

    def __post_init__(self):
        if int(self.steps_per_pair) < 1:
            raise ValueError("steps_per_pair must be >= 1")


@dataclass
class PropagationResult:
    final: ThreeLevelState
    times: np.ndarray
    populations: np.ndarray  # (n, 3): p1, p0, pe
    norm_drift: float
    delta: float = 0.0

    @property
    def trace(self) -> list[tuple[float, float, float, float]]:
        return [(float(t), *map(float, p)) for t, p in zip(self.times, self.populations)]

    def to_csv(self, path) -> None:
        write_trace_csv(self, path)


def write_trace_csv(result: PropagationResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_us", "p1", "p0", "pe"])
        for t, (p1, p0, pe) in zip(result.times, result.populations):
            w.writerow([f"{t:.9g}", f"{p1:.9g}", f"{p0:.9g}", f"{pe:.9g}"])


def derivative(state: ThreeLevelState, omega1: complex, omega0: complex,
               delta: float) -> ThreeLevelState:
    c1, c0, ce = state.c1, state.c0, state.ce
    return ThreeLevelState(
        -0.5j * omega1 * ce,
        -0.5j * omega0 * ce,
        -0.5j * omega1 * c1 - 0.5j * np.conj(omega0) * c0 - 1j * delta * ce,
    )


def hamiltonian(omega1: complex, omega0: complex, delta: float) -> np.ndarray:
    """Generator ``H`` with ``dC/dt = -i H C`` in the ``(C1, C0, Ce)`` order."""
    return np.array(
        [[0, 0, omega1 / 2], [0, 0, omega0 / 2],
         [omega1 / 2, np.conj(omega0) / 2, delta]],
        dtype=complex,
    )


# --------------------------------------------------------------------------
# RK4 kernel
# --------------------------------------------------------------------------


@numba.njit(cache=True, fastmath=False)
def _rk4_kernel(w1, w0, field_idx, deltas, psi, h, record):
    """Advance ``psi`` (B, 3) in place through one pulse pair.

    ``w1``/``w0`` hold field samples on the half-step grid (F, 2N+1);
    ``field_idx`` picks the field row for each batch member. Returns the max
    norm drift per member and, if ``record``, populations after every step
    as a (B, N, 3) array.
    """
    nb = psi.shape[0]
    n = (w1.shape[1] - 1) // 2
    drift = np.zeros(nb)
    trace = np.zeros((nb if record else 0, n if record else 0, 3))
    for b in range(nb):
        f = field_idx[b]
        d = deltas[b]
        y1 = psi[b, 0]
        y0 = psi[b, 1]
        ye = psi[b, 2]
        n0 = y1.real ** 2 + y1.imag ** 2 + y0.real ** 2 + y0.imag ** 2 + ye.real ** 2 + ye.imag ** 2
        worst = 0.0
        for i in range(n):
            a1 = 0.5 * w1[f, 2 * i]
            a0 = 0.5 * w0[f, 2 * i]
            m1 = 0.5 * w1[f, 2 * i + 1]
            m0 = 0.5 * w0[f, 2 * i + 1]
            e1 = 0.5 * w1[f, 2 * i + 2]
            e0 = 0.5 * w0[f, 2 * i + 2]
            # k = -i H y
            k11 = -1j * a1 * ye
            k10 = -1j * a0 * ye
            k1e = -1j * (a1 * y1 + a0.conjugate() * y0 + d * ye)
            u1 = y1 + 0.5 * h * k11
            u0 = y0 + 0.5 * h * k10
            ue = ye + 0.5 * h * k1e
            k21 = -1j * m1 * ue
            k20 = -1j * m0 * ue
            k2e = -1j * (m1 * u1 + m0.conjugate() * u0 + d * ue)
            u1 = y1 + 0.5 * h * k21
            u0 = y0 + 0.5 * h * k20
            ue = ye + 0.5 * h * k2e
            k31 = -1j * m1 * ue
            k30 = -1j * m0 * ue
            k3e = -1j * (m1 * u1 + m0.conjugate() * u0 + d * ue)
            u1 = y1 + h * k31
            u0 = y0 + h * k30
            ue = ye + h * k3e
            k41 = -1j * e1 * ue
            k40 = -1j * e0 * ue
            k4e = -1j * (e1 * u1 + e0.conjugate() * u0 + d * ue)
            y1 = y1 + h / 6.0 * (k11 + 2.0 * k21 + 2.0 * k31 + k41)
            y0 = y0 + h / 6.0 * (k10 + 2.0 * k20 + 2.0 * k30 + k40)
            ye = ye + h / 6.0 * (k1e + 2.0 * k2e + 2.0 * k3e + k4e)
            p1 = y1.real ** 2 + y1.imag ** 2
            p0 = y0.real ** 2 + y0.imag ** 2
            pe = ye.real ** 2 + ye.imag ** 2
            dev = abs(p1 + p0 + pe - n0)
            if dev > worst:
                worst = dev
            if record:
                trace[b, i, 0] = p1
                trace[b, i, 1] = p0
                trace[b, i, 2] = pe
        psi[b, 0] = y1
        psi[b, 1] = y0
        psi[b, 2] = ye
        drift[b] = worst
    return drift, trace


def _half_step_fields(pair: PulsePair, steps: int):
    t = np.linspace(0.0, pair.duration, 2 * steps + 1)
    o1, o0 = pair.fields(t)
    return np.ascontiguousarray(o1, complex), np.ascontiguousarray(o0, complex)


def _suggest_steps(drift: float, ceiling: float, steps: int) -> int:
    # RK4 per-step norm defect scales as h^6, accumulated drift as h^5
    factor = (drift / ceiling) ** 0.2 if drift > 0 else 1.0
    return int(math.ceil(steps * factor * 1.1 / 100.0) * 100)


def propagate_batch(sequences: Sequence[PulseSequence] | PulseSequence, initial: QubitState,
                    deltas, steps_per_pair: int = DEFAULT_STEPS,
                    seq_index=None, norm_ceiling: float | None = DEFAULT_NORM_CEILING):
    """Final states for many (sequence, detuning) combinations.

    Parameters
    ----------
    sequences : PulseSequence or list of PulseSequence
        All sequences must share ``t1`` and ``t2``.
    deltas : array_like
        Detunings in rad/us, one per batch member.
    seq_index : array_like of int, optional
        Sequence used by each batch member; defaults to 0 for all.
    norm_ceiling : float or None
        Raise :class:`IntegratorResolutionError` if any member drifts past
        this value. ``None`` disables the check.

    Returns
    -------
    finals : ndarray, shape (B, 3)
        ``(C1, C0, Ce)`` at ``t2``.
    drift : ndarray, shape (B,)
    """
    if isinstance(sequences, PulseSequence):
        sequences = [sequences]
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    nb = deltas.size
    idx = np.zeros(nb, np.int64) if seq_index is None else np.asarray(seq_index, np.int64)
    if idx.shape != deltas.shape:
        raise ValueError("seq_index must match deltas in shape")
    t1, t2 = sequences[0].t1, sequences[0].t2
    if any(abs(s.t1 - t1) > 1e-12 or abs(s.t2 - t2) > 1e-12 for s in sequences):
        raise ValueError("all sequences in a batch must share t1 and t2")

    psi = np.empty((nb, 3), complex)
    psi[:, 0] = initial.c1
    psi[:, 1] = initial.c0
    psi[:, 2] = 0.0
    drift = np.zeros(nb)
    for k, (tstart, tend) in enumerate(((0.0, t1), (t1, t2))):
        rows = [_half_step_fields(s.pairs[k], steps_per_pair) for s in sequences]
        w1 = np.stack([r[0] for r in rows])
        w0 = np.stack([r[1] for r in rows])
        h = (tend - tstart) / steps_per_pair
        d, _ = _rk4_kernel(w1, w0, idx, deltas, psi, h, False)
        # drift is measured against the norm at the start of each pair
        drift += d
    if norm_ceiling is not None and drift.size and drift.max() > norm_ceiling:
        i = int(np.argmax(drift))
        raise IntegratorResolutionError(
            float(drift[i]), norm_ceiling, steps_per_pair,
            _suggest_steps(float(drift[i]), norm_ceiling, steps_per_pair), float(deltas[i]),
        )
    return psi, drift


def propagate_pair(pair: PulsePair, state, delta: float = 0.0,
                   steps: int = DEFAULT_STEPS) -> np.ndarray:
    """Propagate a single ``(C1, C0, Ce)`` vector through one pulse pair."""
    psi = np.asarray(state, dtype=complex).reshape(1, 3).copy()
    w1, w0 = _half_step_fields(pair, steps)
    _rk4_kernel(w1[None], w0[None], np.zeros(1, np.int64), np.array([float(delta)]), psi,
                pair.duration / steps, False)
    return psi[0]


def propagate(seq: PulseSequence, initial: QubitState, cfg: SimConfig = SimConfig()) -> PropagationResult:
    """Integrate the sequence from ``t = 0`` to ``t2`` recording populations.

    Raises
    ------
    IntegratorResolutionError
        If the norm drifts by more than ``cfg.norm_ceiling``.
    """
    n = int(cfg.steps_per_pair)
    psi = np.empty((1, 3), complex)
    psi[0] = [initial.c1, initial.c0, 0.0]
    times = [np.zeros(1)]
    pops = [np.array([[abs(initial.c1) ** 2, abs(initial.c0) ** 2, 0.0]])]
    norm0 = float(np.sum(np.abs(psi) ** 2))
    delta = np.array([float(cfg.detuning)])
    for tstart, pair in ((0.0, seq.pair1), (seq.t1, seq.pair2)):
        w1, w0 = _half_step_fields(pair, n)
        h = pair.duration / n
        _, trace = _rk4_kernel(w1[None], w0[None], np.zeros(1, np.int64), delta, psi, h, True)
        times.append(tstart + h * np.arange(1, n + 1))
        pops.append(trace[0])
    times = np.concatenate(times)
    # pin the last sample to t2 exactly
    times[-1] = seq.t2
    pops = np.concatenate(pops)
    drift = float(np.max(np.abs(pops.sum(axis=1) - norm0)))
    if drift > cfg.norm_ceiling:
        raise IntegratorResolutionError(drift, cfg.norm_ceiling, n,
                                        _suggest_steps(drift, cfg.norm_ceiling, n), cfg.detuning)
    return PropagationResult(ThreeLevelState.from_vector(psi[0]), times, pops, drift,
                             float(cfg.detuning))


def fidelity(final, target: QubitState) -> float:
    """``|<psi(t2)|psi_tg>|^2`` using only the qubit amplitudes.

    Population left in ``|e>`` lowers the result. Accepts a
    :class:`ThreeLevelState` or an array of ``(C1, C0, Ce)`` rows.
    """
    if isinstance(final, ThreeLevelState):
        final = final.vector
    final = np.asarray(final, dtype=complex)
    amp = np.conj(target.c1) * final[..., 0] + np.conj(target.c0) * final[..., 1]
    f = np.abs(amp) ** 2
    return float(f) if np.ndim(f) == 0 else f


class InvarianceReport(NamedTuple):
    dark_overlap: float  # |<d|U d>|^2
    bright_amplitude: complex  # <b|U b>, ideally -1
    superposition_fidelity: float  # U (d+b)/sqrt2 against (d-b)/sqrt2


def dark_state_invariance_check(seq: PulseSequence, cfg: SimConfig = SimConfig()) -> InvarianceReport:
    """Check the gate pair acts as ``|d><d| - |b><b|`` on resonance.

    Only pair 1 is propagated. The raw bright-state amplitude carries no
    global-phase ambiguity here because the dark state itself is returned
    with unit amplitude.
    """
    if cfg.detuning != 0.0:
        raise ValueError("the invariance check is defined at zero detuning")
    basis = dark_bright(seq.params)
    d = ThreeLevelState.from_qubit(basis.dark).vector
    b = ThreeLevelState.from_qubit(basis.bright).vector
    steps = int(cfg.steps_per_pair)
    ud = propagate_pair(seq.pair1, d, 0.0, steps)
    ub = propagate_pair(seq.pair1, b, 0.0, steps)
    us = propagate_pair(seq.pair1, (d + b) / math.sqrt(2.0), 0.0, steps)
    want = (d - b) / math.sqrt(2.0)
    return InvarianceReport(
        float(abs(np.vdot(d, ud)) ** 2),
        complex(np.vdot(b, ub)),
        float(abs(np.vdot(want, us)) ** 2),
    )


def auto_steps(seq: PulseSequence, max_detuning: float = 0.0, step_phase: float = 0.05,
               floor: int = DEFAULT_STEPS) -> int:
    """Steps per pair keeping ``h * (peak rate)`` at or below ``step_phase``.

    The rate is the largest two-color Rabi magnitude over both pairs plus the
    largest |detuning| (rad/us). Never returns less than ``floor``.
    """
    rate = max(seq.peak_rabi(1), seq.peak_rabi(2)) + abs(max_detuning)
    longest = max(seq.t1, seq.t2 - seq.t1)
    return max(int(floor), int(math.ceil(rate * longest / step_phase)))
