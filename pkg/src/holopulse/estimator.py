"""scikit-learn style wrappers.

``X`` is always a column of detunings in kHz. ``predict`` returns the gate
fidelity at each detuning. ``fit`` ignores ``y``, because the target fidelity
is 1 everywhere. ``score`` is the mean predicted fidelity.
"""
from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .analysis import khz_to_rad_per_us, sweep_sequences
from .gates import GateParams, QubitState
from .optimize import ObjectiveSpec, OptimizerSettings, optimize
from .pulses import DEFAULT_T1, build_sequence, get_preset


def _detunings(X) -> np.ndarray:
    X = check_array(X, ensure_2d=False, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected one column of detunings (kHz), got {X.shape[1]}")
        X = X[:, 0]
    return X


class _PulseFidelityMixin:
    """``predict`` and ``score`` shared by the estimators below."""

    def _gate(self) -> GateParams:
        return GateParams.from_name(self.gate)

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "coeffs_")
        delta = _detunings(X)
        seq = build_sequence(self._gate(), self.coeffs_, self.t1_us)
        return sweep_sequences(seq, self._gate(), delta, QubitState.one())

    def score(self, X, y=None) -> float:
        return float(np.mean(self.predict(X)))


class PresetPulse(_PulseFidelityMixin, BaseEstimator):
    """Fixed coefficient row (a preset name or an explicit vector).

    ``fit`` only validates the row against the edge constraints.
    """

    def __init__(self, gate: str = "x", coeffs="op1", t1_us: float = DEFAULT_T1):
        self.gate = gate
        self.coeffs = coeffs
        self.t1_us = t1_us

    def fit(self, X=None, y=None):
        row = get_preset(self.coeffs) if isinstance(self.coeffs, str) else self.coeffs
        seq = build_sequence(self._gate(), row, self.t1_us)
        self.coeffs_ = np.asarray(seq.pair1.envelope.coeffs, dtype=float)
        return self


class RobustPulseDesigner(_PulseFidelityMixin, BaseEstimator):
    """Optimize the cosine coefficients so the gate is robust over ``X``.

    Parameters
    ----------
    gate : str
        Gate name (``x``, ``y``, ``z``, ``h``).
    t1_us : float
        Duration of the gate pair.
    rabi_cap_mhz : float, optional
        Soft cap on the peak two-color Rabi magnitude.
    restarts, max_iter, goal, seed
        Passed to :class:`~holopulse.optimize.OptimizerSettings`.
    init : array-like, optional
        Warm start for the six free coefficients.
    """

    def __init__(self, gate: str = "x", t1_us: float = DEFAULT_T1, rabi_cap_mhz=None,
                 restarts: int = 8, max_iter: int = 2000, goal: float = 0.01, seed: int = 0,
                 init=None):
        self.gate = gate
        self.t1_us = t1_us
        self.rabi_cap_mhz = rabi_cap_mhz
        self.restarts = restarts
        self.max_iter = max_iter
        self.goal = goal
        self.seed = seed
        self.init = init

    def fit(self, X, y=None):
        delta = _detunings(X)
        cap = None if self.rabi_cap_mhz is None else 2.0 * math.pi * self.rabi_cap_mhz
        spec = ObjectiveSpec(self._gate(), tuple(khz_to_rad_per_us(delta)), t1=self.t1_us,
                             rabi_cap=cap)
        settings = OptimizerSettings(max_iter=self.max_iter, restarts=self.restarts,
                                     goal=self.goal, seed=self.seed)
        self.report_ = optimize(spec, self.init, settings)
        self.coeffs_ = np.asarray(self.report_.coeffs)
        self.n_features_in_ = 1
        return self
