"""Detuning-robust holonomic single-qubit gates in a three-level Lambda system.

Pulse shapes, a fixed-step RK4 propagator, fidelity sweeps, a minimax
coefficient optimizer and a two-tone AWG exporter.
"""
__version__ = "0.1.0"

from .gates import GateParams, QubitState, dark_bright, ideal_gate, target_state
from .pulses import OP1, OP2, CosineEnvelope, PulseSequence, build_sequence
from .dynamics import SimConfig, fidelity, propagate, propagate_batch
from .analysis import (a2_robustness_map, bandwidth_at, compare_baselines,
                       sweep_detuning)
from .optimize import ObjectiveSpec, OptimizerSettings, optimize
from .awg import RfSpec, synthesize

__all__ = [
    "GateParams", "QubitState", "dark_bright", "ideal_gate", "target_state",
    "OP1", "OP2", "CosineEnvelope", "PulseSequence", "build_sequence",
    "SimConfig", "fidelity", "propagate", "propagate_batch",
    "a2_robustness_map", "bandwidth_at", "compare_baselines", "sweep_detuning",
    "ObjectiveSpec", "OptimizerSettings", "optimize",
    "RfSpec", "synthesize",
]
