"""Pulse envelopes and the two-pair pulse sequence.

Envelopes are angular Rabi frequencies in rad/us on a local time axis
``[0, duration]`` (us). Divide by ``2*pi`` for MHz.

The cosine envelope is::

    Omega(t) = area/T + sum_n a_n * (n*pi/T) * cos(n*pi*t/T)

Every cosine term integrates to zero over ``[0, T]``, so the pulse area is
``area`` whatever the coefficients. Vanishing edges ``Omega(0) = Omega(T) = 0``
need two linear constraints on the coefficients (see :class:`ConstraintSet`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import erf

from .gates import GateParams, compensation_params

PI = math.pi

#: Published coefficient rows (a1..a8) for t1 = 4 us.
OP1 = (0.0246, -0.8980, 0.0066, 0.3668, -0.0021, -0.1358, -0.0048, 0.0179)
OP2 = (-0.5400, -0.1582, 5.7637, 3.9338, -0.6641, -0.6328, -1.9186, -1.5777)
PRESETS = {"op1": OP1, "op2": OP2}

DEFAULT_T1 = 4.0
#: Absolute residual accepted for externally supplied coefficient vectors.
CONSTRAINT_TOL = 1e-3


def get_preset(name: str) -> np.ndarray:
    try:
        return np.array(PRESETS[name.strip().lower()], dtype=float)
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}") from None


def _check_domain(t, duration):
    t = np.asarray(t, dtype=float)
    # tolerate float round-off at the edges of a sampling grid
    slack = 1e-12 * max(1.0, duration)
    if np.any(t < -slack) or np.any(t > duration + slack):
        raise ValueError(f"time outside envelope domain [0, {duration}]")
    return np.clip(t, 0.0, duration)


# --------------------------------------------------------------------------
# Envelopes
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CosineEnvelope:
    duration: float
    area: float = PI
    coeffs: tuple = OP1

    kind = "cosine"

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        coeffs = tuple(float(c) for c in np.ravel(self.coeffs))
        if len(coeffs) == 0:
            raise ValueError("at least one coefficient is required")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "duration", float(self.duration))
        object.__setattr__(self, "area", float(self.area))

    @property
    def k(self) -> int:
        return (len(self.coeffs) + 1) // 2

    def __call__(self, t):
        t = _check_domain(t, self.duration)
        a = np.asarray(self.coeffs)
        w = np.arange(1, a.size + 1) * PI / self.duration
        series = np.cos(np.multiply.outer(t, w)) @ (a * w)
        return self.area / self.duration + series

    def doubled(self, duration: float | None = None) -> "CosineEnvelope":
        """Twice this envelope, stretched to ``duration`` (area doubles)."""
        duration = self.duration if duration is None else duration
        return CosineEnvelope(duration, 2.0 * self.area, tuple(2.0 * c for c in self.coeffs))

    def with_coeff(self, index: int, value: float) -> "CosineEnvelope":
        """Copy with ``a_index`` (1-based) replaced; no constraint check."""
        coeffs = list(self.coeffs)
        coeffs[index - 1] = float(value)
        return CosineEnvelope(self.duration, self.area, tuple(coeffs))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "duration_us": self.duration, "area_rad": self.area,
                "coeffs": list(self.coeffs)}


@dataclass(frozen=True)
class GaussianEnvelope:
    """Gaussian centred at ``duration/2``, hard-truncated to ``[0, duration]``.

    The peak is scaled so the truncated integral equals ``area``; no offset is
    subtracted, so the edges are small but nonzero.
    """

    duration: float
    fwhm: float
    area: float = PI

    kind = "gaussian"

    def __post_init__(self):
        if not (self.duration > 0 and self.fwhm > 0 and self.area > 0):
            raise ValueError("duration, fwhm and area must be positive")
        if not self.fwhm < self.duration:
            raise ValueError("fwhm must be shorter than the duration")

    @property
    def sigma(self) -> float:
        return self.fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))

    @property
    def peak(self) -> float:
        s = self.sigma
        truncated = s * math.sqrt(2.0 * PI) * erf(self.duration / (2.0 * math.sqrt(2.0) * s))
        return self.area / truncated

    def __call__(self, t):
        t = _check_domain(t, self.duration)
        x = (t - self.duration / 2.0) / self.sigma
        return self.peak * np.exp(-0.5 * x * x)

    def doubled(self, duration: float | None = None) -> "GaussianEnvelope":
        duration = self.duration if duration is None else duration
        return GaussianEnvelope(duration, self.fwhm * duration / self.duration, 2.0 * self.area)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "duration_us": self.duration, "area_rad": self.area,
                "fwhm_us": self.fwhm}


@dataclass(frozen=True)
class SquareEnvelope:
    """Constant ``area/duration``; the edges are discontinuous by design."""

    duration: float
    area: float = PI

    kind = "square"

    def __post_init__(self):
        if not (self.duration > 0 and self.area > 0):
            raise ValueError("duration and area must be positive")

    def __call__(self, t):
        t = _check_domain(t, self.duration)
        return np.full(np.shape(t), self.area / self.duration)

    def doubled(self, duration: float | None = None) -> "SquareEnvelope":
        duration = self.duration if duration is None else duration
        return SquareEnvelope(duration, 2.0 * self.area)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "duration_us": self.duration, "area_rad": self.area}


Envelope = Union[CosineEnvelope, GaussianEnvelope, SquareEnvelope]


def envelope_value(env: Envelope, t):
    """Rabi frequency (rad/us) of ``env`` at local time ``t``."""
    return env(t)


def gaussian_envelope(duration: float, t_fwhm: float, area: float = PI) -> GaussianEnvelope:
    return GaussianEnvelope(duration, t_fwhm, area)


def square_envelope(duration: float, area: float = PI) -> SquareEnvelope:
    return SquareEnvelope(duration, area)


def envelope_from_dict(data: dict) -> Envelope:
    kind = data.get("kind", "cosine")
    if kind == "cosine":
        return CosineEnvelope(data["duration_us"], data.get("area_rad", PI), tuple(data["coeffs"]))
    if kind == "gaussian":
        return GaussianEnvelope(data["duration_us"], data["fwhm_us"], data.get("area_rad", PI))
    if kind == "square":
        return SquareEnvelope(data["duration_us"], data.get("area_rad", PI))
    raise ValueError(f"unknown envelope kind {kind!r}")


def pulse_area(env: Envelope, n: int = 20001) -> float:
    """Numerical area by composite Simpson quadrature (``n`` odd)."""
    from scipy.integrate import simpson

    t = np.linspace(0.0, env.duration, n)
    return float(simpson(env(t), x=t))


class Fwhm(NamedTuple):
    width: float
    left: float
    right: float
    multimodal: bool


def measure_fwhm(env: Envelope, n: int = 20001) -> Fwhm:
    """Width between the outermost half-maximum crossings.

    Crossings are bracketed on an ``n``-point grid and refined by bisection on
    the envelope itself. ``multimodal`` is set when the grid shows more than
    two crossings. An envelope that never drops below half maximum (a square
    pulse) has width ``duration``.
    """
    t = np.linspace(0.0, env.duration, n)
    y = env(t)
    i = int(np.argmax(y))
    lo, hi = t[max(i - 1, 0)], t[min(i + 1, n - 1)]
    peak = minimize_scalar(lambda x: -float(env(x)), bounds=(lo, hi), method="bounded",
                           options={"xatol": 1e-13})
    half = 0.5 * max(y[i], -float(peak.fun))
    above = y >= half
    edges = np.flatnonzero(above[1:] != above[:-1])
    multimodal = edges.size > 2

    def refine(i):
        lo, hi = t[i], t[i + 1]
        f_lo = env(lo) - half
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            f_mid = env(mid) - half
            if (f_mid >= 0) == (f_lo >= 0):
                lo, f_lo = mid, f_mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    if edges.size == 0:
        left, right = 0.0, env.duration
    else:
        left = 0.0 if above[0] else refine(edges[0])
        right = env.duration if above[-1] else refine(edges[-1])
    return Fwhm(float(right - left), float(left), float(right), bool(multimodal))


# --------------------------------------------------------------------------
# Linear edge constraints
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstraintSet:
    """Targets for ``sum (2j-1) a_{2j-1}`` and ``sum j a_{2j}``.

    ``even_target`` is ``-area/(2*pi)``: -0.5 for the gate pair, -1 for the
    compensation pair.
    """

    odd_target: float = 0.0
    even_target: float = -0.5
    k: int = 4

    def __post_init__(self):
        if int(self.k) < 1:
            raise ValueError("k must be a positive integer")

    @classmethod
    def for_area(cls, area: float, k: int = 4) -> "ConstraintSet":
        return cls(0.0, -area / (2.0 * PI), k)

    @property
    def n_coeffs(self) -> int:
        return 2 * self.k

    @property
    def n_free(self) -> int:
        return 2 * self.k - 2


GATE_PAIR = ConstraintSet(0.0, -0.5, 4)
COMPENSATION_PAIR = ConstraintSet(0.0, -1.0, 4)


def _as_coeffs(coeffs, cset: ConstraintSet) -> np.ndarray:
    a = np.asarray(coeffs, dtype=float).ravel()
    if a.size != cset.n_coeffs:
        raise ValueError(f"expected {cset.n_coeffs} coefficients for k={cset.k}, got {a.size}")
    return a


def constraint_residuals(coeffs, cset: ConstraintSet = GATE_PAIR) -> tuple[float, float]:
    a = _as_coeffs(coeffs, cset)
    j = np.arange(1, cset.k + 1)
    odd = float(np.dot(2 * j - 1, a[0::2])) - cset.odd_target
    even = float(np.dot(j, a[1::2])) - cset.even_target
    return odd, even


def lift_free_dofs(free, cset: ConstraintSet = GATE_PAIR) -> np.ndarray:
    """Complete ``2k-2`` free coefficients to a constraint-satisfying vector.

    The free values are ``a_1 .. a_{2k-2}``; the last odd and last even
    coefficients (``a_7``, ``a_8`` for ``k=4``) are solved for.
    """
    free = np.asarray(free, dtype=float).ravel()
    if free.size != cset.n_free:
        raise ValueError(f"expected {cset.n_free} free values for k={cset.k}, got {free.size}")
    k = cset.k
    a = np.empty(2 * k)
    a[:-2] = free
    j = np.arange(1, k)
    a[-2] = (cset.odd_target - np.dot(2 * j - 1, free[0::2])) / (2 * k - 1)
    a[-1] = (cset.even_target - np.dot(j, free[1::2])) / k
    return a


def project_free_dofs(coeffs, cset: ConstraintSet = GATE_PAIR) -> np.ndarray:
    """Right inverse of :func:`lift_free_dofs`: the leading ``2k-2`` entries."""
    return _as_coeffs(coeffs, cset)[:-2].copy()


# --------------------------------------------------------------------------
# Pulse pairs and sequences
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PulsePair:
    """Two-color pulse pair sharing one real envelope.

    ``Omega1 = 2B*Omega(t)`` drives |1>-|e>, ``Omega0 = 2A*Omega(t)*exp(-i*phi)``
    drives |0>-|e>.
    """

    envelope: Envelope
    params: GateParams
    role: str = "gate"

    def __post_init__(self):
        if self.role not in ("gate", "compensation"):
            raise ValueError(f"role must be 'gate' or 'compensation', got {self.role!r}")

    @property
    def duration(self) -> float:
        return self.envelope.duration

    def fields(self, t):
        """Complex ``(Omega1, Omega0)`` at local time ``t``."""
        om = self.envelope(t)
        p = self.params
        return (2.0 * p.B * om).astype(complex), 2.0 * p.A * om * np.exp(-1j * p.phi)


@dataclass(frozen=True)
class PulseSequence:
    pair1: PulsePair
    pair2: PulsePair
    t1: float
    t2: float

    def __post_init__(self):
        if not 0 < self.t1 < self.t2:
            raise ValueError("need 0 < t1 < t2")
        if abs(self.pair1.duration - self.t1) > 1e-12 * self.t1:
            raise ValueError("pair 1 duration must equal t1")
        if abs(self.pair2.duration - (self.t2 - self.t1)) > 1e-12 * self.t2:
            raise ValueError("pair 2 duration must equal t2 - t1")

    @property
    def pairs(self) -> tuple[PulsePair, PulsePair]:
        return self.pair1, self.pair2

    @property
    def params(self) -> GateParams:
        return self.pair1.params

    @classmethod
    def from_envelope(cls, params: GateParams, envelope: Envelope,
                      t2: float | None = None) -> "PulseSequence":
        """Gate pair on ``envelope``; compensation pair on its doubled copy.

        No constraint checking, so perturbed or baseline envelopes are allowed.
        """
        t1 = envelope.duration
        t2 = 2.0 * t1 if t2 is None else float(t2)
        if not t2 > t1:
            raise ValueError("need t2 > t1")
        pair1 = PulsePair(envelope, params, "gate")
        pair2 = PulsePair(envelope.doubled(t2 - t1), compensation_params(params), "compensation")
        return cls(pair1, pair2, t1, t2)

    def fields(self, t):
        """Complex ``(Omega1, Omega0)`` at absolute time(s) ``t`` in ``[0, t2]``.

        At ``t == t1`` the gate pair's (vanishing) value is returned.
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        o1 = np.zeros(t.shape, complex)
        o0 = np.zeros(t.shape, complex)
        first = t <= self.t1
        if first.any():
            o1[first], o0[first] = self.pair1.fields(t[first])
        if (~first).any():
            o1[~first], o0[~first] = self.pair2.fields(t[~first] - self.t1)
        return o1, o0

    def peak_rabi(self, pair: int = 1) -> float:
        """Peak of ``sqrt(|Omega1|^2 + |Omega0|^2)`` (rad/us) over one pair."""
        p = self.pairs[pair - 1]
        t = np.linspace(0.0, p.duration, 20001)
        return float(2.0 * np.abs(p.envelope(t)).max())

    def peak_field(self, which: str = "omega1", pair: int = 1) -> float:
        """Peak ``|Omega1|`` or ``|Omega0|`` (rad/us) over one pair."""
        p = self.pairs[pair - 1]
        t = np.linspace(0.0, p.duration, 20001)
        o1, o0 = p.fields(t)
        return float(np.abs(o1 if which == "omega1" else o0).max())

    def to_dict(self) -> dict:
        return {
            "gate": {"theta_rad": self.params.theta, "phi_rad": self.params.phi},
            "t1_us": self.t1,
            "t2_us": self.t2,
            "envelope": self.pair1.envelope.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PulseSequence":
        gate = data["gate"]
        params = GateParams(gate["theta_rad"], gate.get("phi_rad", 0.0))
        return cls.from_envelope(params, envelope_from_dict(data["envelope"]), data.get("t2_us"))


def build_sequence(params: GateParams, coeffs=OP1, t1: float = DEFAULT_T1,
                   t2: float | None = None, tol: float = CONSTRAINT_TOL) -> PulseSequence:
    """Two-pair sequence for ``params`` with a cosine gate envelope.

    ``coeffs`` must meet the gate-pair edge constraints within ``tol``. With
    the default ``t2 = 2*t1`` the compensation envelope is exactly twice the
    gate envelope.
    """
    a = np.asarray(coeffs, dtype=float).ravel()
    if a.size % 2:
        raise ValueError("coefficient vector must have even length 2k")
    cset = ConstraintSet(0.0, -0.5, a.size // 2)
    res = constraint_residuals(a, cset)
    if max(abs(r) for r in res) > tol:
        raise ValueError(
            f"coefficients violate the edge constraints: residuals {res[0]:.3g}, {res[1]:.3g}"
        )
    return PulseSequence.from_envelope(params, CosineEnvelope(t1, PI, tuple(a)), t2)
