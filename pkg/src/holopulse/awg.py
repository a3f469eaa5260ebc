"""Two-tone RF drive for an AWG (optionally feeding an AOM).

Each optical field maps to one RF tone. The tone amplitude is ``C*|Omega|``, a
negative envelope sign becomes a pi phase jump, and the static phases are
``0`` for the |1>-|e> tone and ``-phi`` for the |0>-|e> tone. Frequencies are
in MHz and times in us, so ``2*pi*f*t`` is in radians.

Binary export writes little-endian float32, channel-major, with a JSON
sidecar next to it (``<file>.json``)::

    {"format": "f32", "dtype": "<f4", "layout": "channel-major",
     "rate_per_us": ..., "channels": [...], "n_samples": ..., "duration_us": ...}
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .fileio import write_bytes
from .pulses import PulsePair, PulseSequence


TWO_PI = 2.0 * math.pi


class AliasingError(ValueError):
    pass


@dataclass(frozen=True)
class RfSpec:
    """RF tone plan. No defaults: all of these depend on the hardware.

    ``sample_rate`` is in samples per us (i.e. MS/s).
    """

    f1: float
    f0: float
    f10: float
    conversion: float
    sample_rate: float

    def __post_init__(self):
        for name in ("f1", "f0", "sample_rate"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not math.isfinite(self.conversion):
            raise ValueError("conversion constant must be finite")
        if abs((self.f1 - self.f0) - self.f10) > 1e-9 * max(abs(self.f1), abs(self.f0)):
            raise ValueError(
                f"tone spacing f1 - f0 = {self.f1 - self.f0!r} MHz must equal the qubit "
                f"splitting f10 = {self.f10!r} MHz"
            )

    def check_aliasing(self) -> None:
        nyquist = 2.0 * max(self.f1, self.f0)
        if not self.sample_rate > nyquist:
            raise AliasingError(
                f"sample rate {self.sample_rate} MS/s must exceed 2*max(f1, f0) = {nyquist} MHz"
            )


class ToneDrive(NamedTuple):
    label: str
    amplitude: np.ndarray  # C * |Omega|
    flip: np.ndarray  # 0 or pi
    static_phase: float


def rf_parameters(pair: PulsePair, t, conversion: float = 1.0) -> tuple[ToneDrive, ToneDrive]:
    """Per-tone amplitude, sign flip and static phase at local times ``t``."""
    t = np.asarray(t, dtype=float)
    om = pair.envelope(t)
    p = pair.params
    real1 = 2.0 * p.B * om
    real0 = 2.0 * p.A * om  # the e^{-i phi} factor becomes the static phase
    tone1 = ToneDrive("omega1", conversion * np.abs(real1), np.where(real1 < 0, math.pi, 0.0), 0.0)
    tone0 = ToneDrive("omega0", conversion * np.abs(real0), np.where(real0 < 0, math.pi, 0.0),
                      -p.phi)
    return tone1, tone0


@dataclass
class Waveform:
    samples: np.ndarray  # (n_channels, n_samples)
    rate: float  # samples per us
    channels: tuple

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples))
        if self.samples.shape[0] != len(self.channels):
            raise ValueError("one channel label per sample row is required")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.rate

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) / self.rate


def sample_times(duration: float, rate: float) -> np.ndarray:
    return np.arange(int(math.ceil(duration * rate - 1e-9))) / rate


def synthesize(seq: PulseSequence, spec: RfSpec, combine: bool = True) -> Waveform:
    """Sample ``sum_tones E(t) cos(2 pi f t + phase + flip(t))`` over ``[0, t2)``.

    With ``combine=False`` the two tones are returned as separate channels.
    The carrier phase runs on absolute time, so it is continuous across the
    pair boundary apart from the static-phase change of the second pair.
    """
    spec.check_aliasing()
    t = sample_times(seq.t2, spec.sample_rate)
    out1 = np.zeros_like(t)
    out0 = np.zeros_like(t)
    for start, pair in ((0.0, seq.pair1), (seq.t1, seq.pair2)):
        mask = (t <= seq.t1) if start == 0.0 else (t > seq.t1)
        if not mask.any():
            continue
        ts = t[mask]
        tone1, tone0 = rf_parameters(pair, ts - start, spec.conversion)
        out1[mask] = tone1.amplitude * np.cos(TWO_PI * spec.f1 * ts + tone1.static_phase + tone1.flip)
        out0[mask] = tone0.amplitude * np.cos(TWO_PI * spec.f0 * ts + tone0.static_phase + tone0.flip)
    if combine:
        return Waveform((out1 + out0)[None, :], spec.sample_rate, ("sum",))
    return Waveform(np.vstack([out1, out0]), spec.sample_rate, ("tone1", "tone0"))


def envelope_bandwidth(seq: PulseSequence, spec: RfSpec, energy_fraction: float = 0.99) -> dict:
    """Informational rise-time figures for the tone envelopes (not enforced).

    Reports the largest slew ``max |dE/dt|`` (amplitude units per us) and the
    one-sided frequency (MHz) holding ``energy_fraction`` of the envelope
    energy, for each tone of the signed envelope.
    """
    dt = 1.0 / spec.sample_rate
    t = sample_times(seq.t2, spec.sample_rate)
    env = {"omega1": np.zeros_like(t), "omega0": np.zeros_like(t)}
    for start, pair in ((0.0, seq.pair1), (seq.t1, seq.pair2)):
        mask = (t <= seq.t1) if start == 0.0 else (t > seq.t1)
        om = pair.envelope(t[mask] - start)
        env["omega1"][mask] = spec.conversion * 2.0 * pair.params.B * om
        env["omega0"][mask] = spec.conversion * 2.0 * pair.params.A * om
    out = {}
    for name, e in env.items():
        spectrum = np.abs(np.fft.rfft(e)) ** 2
        freqs = np.fft.rfftfreq(e.size, dt)
        total = spectrum.sum()
        if total == 0:
            bw = 0.0
        else:
            cum = np.cumsum(spectrum) / total
            bw = float(freqs[min(np.searchsorted(cum, energy_fraction), freqs.size - 1)])
        out[name] = {"max_slew": float(np.max(np.abs(np.diff(e))) / dt) if e.size > 1 else 0.0,
                     "bandwidth_mhz": bw}
    return out


# --------------------------------------------------------------------------
# File formats
# --------------------------------------------------------------------------


def export(w: Waveform, path, fmt: str = "csv") -> Path:
    """Write ``w`` as CSV (``t_us`` plus one column per channel) or raw f32.

    CSV values use ``repr`` so float64 samples survive a round trip exactly.
    The f32 format stores float32 and writes a JSON sidecar ``<path>.json``.
    """
    path = Path(path)
    if fmt == "csv":
        lines = [",".join(["t_us", *("value" if w.channels == ("sum",) else c for c in w.channels)])]
        for t, row in zip(w.times, w.samples.T):
            lines.append(",".join([repr(float(t)), *(repr(float(v)) for v in row)]))
        write_bytes(path, ("\n".join(lines) + "\n").encode())
    elif fmt == "f32":
        write_bytes(path, np.ascontiguousarray(w.samples, dtype="<f4").tobytes())
        meta = {"format": "f32", "dtype": "<f4", "layout": "channel-major",
                "rate_per_us": w.rate, "channels": list(w.channels),
                "n_samples": w.n_samples, "duration_us": w.duration}
        write_bytes(sidecar_path(path), (json.dumps(meta, indent=2) + "\n").encode())
    else:
        raise ValueError(f"unknown format {fmt!r}; expected 'csv' or 'f32'")
    return path


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def load_waveform(path, fmt: str | None = None) -> Waveform:
    path = Path(path)
    if fmt is None:
        fmt = "f32" if sidecar_path(path).exists() else "csv"
    if fmt == "f32":
        meta = json.loads(sidecar_path(path).read_text())
        raw = np.frombuffer(path.read_bytes(), dtype=meta["dtype"])
        samples = raw.reshape(len(meta["channels"]), meta["n_samples"])
        return Waveform(samples.copy(), float(meta["rate_per_us"]), tuple(meta["channels"]))
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = np.array([[float(v) for v in r] for r in reader])
    labels = tuple("sum" if h == "value" else h for h in header[1:])
    if rows.size == 0:
        return Waveform(np.zeros((len(labels), 0)), 1.0, labels)
    t = rows[:, 0]
    rate = (t.size - 1) / (t[-1] - t[0]) if t.size > 1 else 1.0
    return Waveform(rows[:, 1:].T.copy(), rate, labels)
