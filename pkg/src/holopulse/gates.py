"""Ideal single-qubit operators realized by the two-pair geometric scheme.

All 2x2 matrices and qubit vectors here use the basis order ``(|0>, |1>)``.
The three-level simulator in :mod:`holopulse.dynamics` uses ``(C1, C0, Ce)``
and converts at its boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi
_ANGLE_TOL = 1e-12
_NORM_TOL = 1e-12


def _wrap_phase(phi: float) -> float:
    phi = math.fmod(float(phi), TWO_PI)
    if phi < 0.0:
        phi += TWO_PI
    # fmod can leave 2*pi - eps; fold values indistinguishable from 2*pi to 0
    if TWO_PI - phi < 1e-15:
        phi = 0.0
    return phi


@dataclass(frozen=True)
class GateParams:
    """Rotation axis ``n = (sin t cos p, sin t sin p, cos t)`` of a pi rotation.

    ``theta`` must lie in ``[0, pi]``; ``phi`` is wrapped into ``[0, 2*pi)``.
    """

    theta: float
    phi: float = 0.0

    def __post_init__(self):
        theta = float(self.theta)
        if not math.isfinite(theta) or theta < -_ANGLE_TOL or theta > math.pi + _ANGLE_TOL:
            raise ValueError(f"theta must be in [0, pi], got {self.theta!r}")
        if not math.isfinite(float(self.phi)):
            raise ValueError(f"phi must be finite, got {self.phi!r}")
        object.__setattr__(self, "theta", min(max(theta, 0.0), math.pi))
        object.__setattr__(self, "phi", _wrap_phase(self.phi))

    @property
    def A(self) -> float:
        """Field weight ``sin(theta/2)`` of the |0>-|e> transition."""
        return math.sin(self.theta / 2.0)

    @property
    def B(self) -> float:
        """Field weight ``-cos(theta/2)`` of the |1>-|e> transition."""
        return -math.cos(self.theta / 2.0)

    @property
    def axis(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)])

    @classmethod
    def sigma_x(cls) -> "GateParams":
        return cls(math.pi / 2, 0.0)

    @classmethod
    def sigma_y(cls) -> "GateParams":
        return cls(math.pi / 2, math.pi / 2)

    @classmethod
    def sigma_z(cls) -> "GateParams":
        # phi is arbitrary for sigma_z; pinned to 0 for reproducibility
        return cls(0.0, 0.0)

    @classmethod
    def hadamard(cls) -> "GateParams":
        return cls(math.pi / 4, 0.0)

    @classmethod
    def from_name(cls, name: str) -> "GateParams":
        key = name.strip().lower()
        try:
            return _NAMED[GATE_ALIASES.get(key, key)]()
        except KeyError:
            raise ValueError(
                f"unknown gate {name!r}; expected one of {sorted(GATE_ALIASES)}"
            ) from None


_NAMED = {
    "x": GateParams.sigma_x,
    "y": GateParams.sigma_y,
    "z": GateParams.sigma_z,
    "h": GateParams.hadamard,
}

GATE_ALIASES = {
    "x": "x", "sx": "x", "sigma_x": "x", "sigmax": "x", "not": "x",
    "y": "y", "sy": "y", "sigma_y": "y", "sigmay": "y",
    "z": "z", "sz": "z", "sigma_z": "z", "sigmaz": "z",
    "h": "h", "hadamard": "h",
}

GATE_NAMES = ("x", "y", "z", "h")


@dataclass(frozen=True)
class QubitState:
    """Normalized qubit state ``c0|0> + c1|1>``."""

    c0: complex
    c1: complex

    def __post_init__(self):
        c0, c1 = complex(self.c0), complex(self.c1)
        norm = abs(c0) ** 2 + abs(c1) ** 2
        if abs(norm - 1.0) > _NORM_TOL:
            raise ValueError(f"qubit state not normalized: |c0|^2 + |c1|^2 = {norm!r}")
        object.__setattr__(self, "c0", c0)
        object.__setattr__(self, "c1", c1)

    @classmethod
    def from_angles(cls, theta0: float, phi0: float = 0.0) -> "QubitState":
        """``cos(theta0)|0> + sin(theta0) e^{i phi0}|1>``."""
        return cls(math.cos(theta0), math.sin(theta0) * complex(math.cos(phi0), math.sin(phi0)))

    @classmethod
    def from_vector(cls, vec, normalize: bool = False) -> "QubitState":
        v = np.asarray(vec, dtype=complex).reshape(2)
        if normalize:
            v = v / np.linalg.norm(v)
        return cls(v[0], v[1])

    @classmethod
    def zero(cls) -> "QubitState":
        return cls(1.0, 0.0)

    @classmethod
    def one(cls) -> "QubitState":
        return cls(0.0, 1.0)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.c0, self.c1], dtype=complex)

    @property
    def populations(self) -> tuple[float, float]:
        return abs(self.c0) ** 2, abs(self.c1) ** 2


@dataclass(frozen=True)
class DarkBrightBasis:
    dark: QubitState
    bright: QubitState


def overlap(a: QubitState, b: QubitState) -> float:
    """Phase-insensitive overlap ``|<a|b>|^2``."""
    return float(abs(np.vdot(a.vector, b.vector)) ** 2)


def ideal_gate(params: GateParams) -> np.ndarray:
    """Return ``n . sigma`` in the ``(|0>, |1>)`` basis.

    This equals ``|d><d| - |b><b|`` for the dark/bright pair of ``params``.
    """
    ct, st = math.cos(params.theta), math.sin(params.theta)
    e = complex(math.cos(params.phi), math.sin(params.phi))
    return np.array([[ct, st * e.conjugate()], [st * e, -ct]], dtype=complex)


def dark_bright(params: GateParams) -> DarkBrightBasis:
    """Dark ``-B|0> + A e^{i phi}|1>`` and bright ``A e^{-i phi}|0> + B|1>`` states."""
    a, b = params.A, params.B
    e = complex(math.cos(params.phi), math.sin(params.phi))
    return DarkBrightBasis(
        dark=QubitState(-b, a * e),
        bright=QubitState(a * e.conjugate(), b),
    )


def compensation_params(params: GateParams) -> GateParams:
    """Parameters ``(pi - theta, pi + phi)`` of the phase-compensation pair."""
    return GateParams(math.pi - params.theta, math.pi + params.phi)


def target_state(initial: QubitState, params: GateParams) -> QubitState:
    """Ideal output of the full sequence.

    The compensation pair acts as the identity on the qubit subspace, so only
    the gate operator contributes.
    """
    return QubitState.from_vector(ideal_gate(params) @ initial.vector)
