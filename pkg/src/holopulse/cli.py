"""Command-line front end.

Every command reads an optional JSON config (``--config``), applies the flag
overrides, validates the result against :data:`CONFIG_SCHEMA` and writes its
outputs plus a ``manifest.json`` into ``--out-dir``. Units at this boundary:
detunings in kHz, times in us, Rabi frequencies in MHz (``Omega / 2 pi``).

Exit codes: 0 success, 1 run failure (or a failed ``verify`` check),
2 invalid config or arguments.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .analysis import (a2_robustness_map, band_stats, bandwidth_at, compare_baselines,
                       sweep_detuning, write_contour_csv, write_curves_csv, write_map_csv)
from .awg import RfSpec, envelope_bandwidth, export, sidecar_path, synthesize
from .dynamics import SimConfig, auto_steps, fidelity, propagate, write_trace_csv
from .fileio import atomic_path, sha256_file, write_json
from .gates import GATE_ALIASES, GateParams, QubitState, target_state
from .optimize import ObjectiveSpec, OptimizerSettings, optimize
from .pulses import (GATE_PAIR, PRESETS, build_sequence, get_preset, measure_fwhm,
                     project_free_dofs)
from .verify import run_suite

log = logging.getLogger("holopulse")

TWO_PI = 2.0 * math.pi

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_INT3 = {"type": "integer", "minimum": 3}


def _block(props: dict) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False}


CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "holopulse run config",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "gate": {"oneOf": [
            {"type": "string", "enum": sorted(GATE_ALIASES)},
            {"type": "object", "required": ["theta_rad"], "additionalProperties": False,
             "properties": {"theta_rad": {"type": "number", "minimum": 0, "maximum": math.pi},
                            "phi_rad": _NUM}},
        ]},
        "coefficients": {"oneOf": [
            {"type": "string", "enum": sorted(PRESETS)},
            {"type": "object", "additionalProperties": False, "required": ["preset"],
             "properties": {"preset": {"type": "string", "enum": sorted(PRESETS)}}},
            {"type": "object", "additionalProperties": False, "required": ["file"],
             "properties": {"file": {"type": "string"}}},
            {"type": "object", "additionalProperties": False, "required": ["values"],
             "properties": {"values": {"type": "array", "items": _NUM,
                                       "minItems": 2, "maxItems": 64}}},
        ]},
        "t1_us": _POS,
        "t2_us": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "initial": _block({"theta0_rad": _NUM, "phi0_rad": _NUM}),
        "seed": {"type": "integer", "minimum": 0},
        "simulate": _block({"detuning_khz": _NUM,
                            "steps_per_pair": {"type": ["integer", "null"], "minimum": 1},
                            "field_points": {"type": "integer", "minimum": 2}}),
        "sweep": _block({"delta_max_khz": _NONNEG, "points": _INT3,
                         "threshold": {"type": "number", "minimum": 0, "maximum": 1}}),
        "heatmap": _block({"eta_max": _NONNEG, "eta_points": {"type": "integer", "minimum": 2},
                           "delta_max_khz": _NONNEG, "delta_points": _INT3,
                           "level": {"type": "number", "minimum": 0, "maximum": 1},
                           "perturb_compensation": {"type": "boolean"}}),
        "optimizer": _block({"band_khz": _NONNEG, "points": {"type": "integer", "minimum": 1},
                             "rabi_cap_mhz": {"type": ["number", "null"], "exclusiveMinimum": 0},
                             "max_iter": {"type": "integer", "minimum": 1},
                             "restarts": {"type": "integer", "minimum": 1},
                             "goal": _NONNEG, "xatol": _POS, "fatol": _POS,
                             "steps_per_pair": {"type": ["integer", "null"], "minimum": 1}}),
        "awg": _block({"f1_mhz": _POS, "f0_mhz": _POS, "f10_mhz": _POS, "conversion": _NUM,
                       "sample_rate_msps": _POS, "format": {"enum": ["csv", "f32"]},
                       "combine": {"type": "boolean"}}),
    },
}

DEFAULTS = {
    "gate": "x",
    "coefficients": "op1",
    "t1_us": 4.0,
    "t2_us": None,
    "initial": {"theta0_rad": math.pi / 2, "phi0_rad": 0.0},
    "seed": 0,
    "simulate": {"detuning_khz": 0.0, "steps_per_pair": None, "field_points": 2001},
    "sweep": {"delta_max_khz": 600.0, "points": 121, "threshold": 0.99},
    "heatmap": {"eta_max": 0.5, "eta_points": 41, "delta_max_khz": 600.0, "delta_points": 121,
                "level": 0.99, "perturb_compensation": False},
    "optimizer": {"band_khz": 410.0, "points": 21, "rabi_cap_mhz": None, "max_iter": 2000,
                  "restarts": 8, "goal": 0.01, "xatol": 1e-6, "fatol": 1e-6,
                  "steps_per_pair": None},
    "awg": {"format": "csv", "combine": True, "conversion": 1.0},
}

# --points lands in a different block per command
_POINTS_KEY = {
    "simulate": ("simulate", "field_points"),
    "sweep": ("sweep", "points"),
    "compare": ("sweep", "points"),
    "heatmap": ("heatmap", "delta_points"),
    "optimize": ("optimizer", "points"),
}


class ConfigError(Exception):
    """Invalid config; reported with a location and exit code 2."""


# --------------------------------------------------------------------------
# Config handling
# --------------------------------------------------------------------------


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from exc
    validate_config(data, str(path))
    return data


def validate_config(data, source: str = "config") -> None:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = ".".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"{source}: field '{where}': {err.message}")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("gate", "coefficients"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve_config(args) -> tuple[dict, Path | None]:
    """Defaults, then the config file, then flags. Returns (config, config dir)."""
    cfg = copy.deepcopy(DEFAULTS)
    base = None
    if args.config:
        cfg = _merge(cfg, load_config(args.config))
        base = Path(args.config).resolve().parent
    if args.gate is not None:
        cfg["gate"] = args.gate
    if args.preset is not None:
        cfg["coefficients"] = args.preset
    if args.t1_us is not None:
        cfg["t1_us"] = args.t1_us
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.points is not None and args.command in _POINTS_KEY:
        block, key = _POINTS_KEY[args.command]
        cfg[block][key] = args.points
    validate_config(cfg, "resolved config")
    return cfg, base


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def gate_from_config(cfg: dict) -> GateParams:
    g = cfg["gate"]
    if isinstance(g, str):
        return GateParams.from_name(g)
    return GateParams(g["theta_rad"], g.get("phi_rad", 0.0))


def coeffs_from_config(cfg: dict, base: Path | None = None) -> np.ndarray:
    src = cfg["coefficients"]
    if isinstance(src, str):
        return get_preset(src)
    if "preset" in src:
        return get_preset(src["preset"])
    if "values" in src:
        return np.asarray(src["values"], dtype=float)
    path = Path(src["file"])
    if not path.is_absolute() and base is not None:
        path = base / path
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"field 'coefficients.file': cannot load {path}: {exc}") from exc
    values = data.get("coeffs") if isinstance(data, dict) else data
    if not isinstance(values, list) or not all(isinstance(v, (int, float)) for v in values):
        raise ConfigError(f"field 'coefficients.file': {path} has no numeric 'coeffs' list")
    return np.asarray(values, dtype=float)


def initial_from_config(cfg: dict) -> QubitState:
    init = cfg["initial"]
    return QubitState.from_angles(init.get("theta0_rad", math.pi / 2), init.get("phi0_rad", 0.0))


def sequence_from_config(cfg: dict, base: Path | None = None):
    try:
        return build_sequence(gate_from_config(cfg), coeffs_from_config(cfg, base),
                              cfg["t1_us"], cfg["t2_us"])
    except ValueError as exc:
        raise ConfigError(f"field 'coefficients': {exc}") from exc


# --------------------------------------------------------------------------
# Output helpers
# --------------------------------------------------------------------------


class RunDir:
    """Output directory that tracks written files for the manifest."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []

    def csv(self, name: str, writer, *args) -> Path:
        target = self.path / name
        with atomic_path(target) as tmp:
            writer(*args, tmp)
        self.files.append(target)
        return target

    def json(self, name: str, obj) -> Path:
        target = write_json(self.path / name, obj)
        self.files.append(target)
        return target

    def add(self, path) -> None:
        self.files.append(Path(path))

    def manifest(self, command: str, cfg: dict) -> Path:
        data = {
            "tool": "holopulse",
            "version": __version__,
            "command": command,
            "config_sha256": config_hash(cfg),
            "seed": cfg["seed"],
            "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "files": {p.name: sha256_file(p) for p in self.files},
            "config": cfg,
        }
        return write_json(self.path / "manifest.json", data)


def _gate_label(cfg: dict) -> str:
    g = cfg["gate"]
    return GATE_ALIASES[g] if isinstance(g, str) else f"theta={g['theta_rad']:.6g},phi={g.get('phi_rad', 0):.6g}"


def _write_fields_csv(seq, n: int, path) -> None:
    t = np.linspace(0.0, seq.t2, n)
    o1, o0 = seq.fields(t)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_us", "omega1_re_mhz", "omega1_im_mhz", "omega0_re_mhz", "omega0_im_mhz"])
        for row in zip(t, o1.real / TWO_PI, o1.imag / TWO_PI, o0.real / TWO_PI, o0.imag / TWO_PI):
            w.writerow([f"{v:.9g}" for v in row])


def _bandwidth_summary(curve, threshold: float) -> dict:
    out = {}
    try:
        lo, hi = bandwidth_at(curve, threshold)
        out["bandwidth_khz"] = [lo, hi]
    except ValueError as exc:
        out["bandwidth_khz"] = None
        out["bandwidth_note"] = str(exc)
    span = float(np.max(np.abs(curve.delta_khz)))
    for band in (410.0, 600.0):
        if band <= span + 1e-9:
            avg, worst = band_stats(curve, band)
            out[f"band_{band:g}_khz"] = {"average": avg, "minimum": worst}
    out["asymmetry"] = curve.asymmetry()
    return out


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_simulate(cfg, base, run: RunDir) -> int:
    seq = sequence_from_config(cfg, base)
    gate = seq.params
    initial = initial_from_config(cfg)
    sim = cfg["simulate"]
    delta = sim["detuning_khz"] * TWO_PI / 1000.0
    steps = sim["steps_per_pair"] or auto_steps(seq, abs(delta))
    res = propagate(seq, initial, SimConfig(steps, delta))
    f = fidelity(res.final, target_state(initial, gate))
    p1, p0, pe = res.final.populations
    run.csv("trace.csv", write_trace_csv, res)
    run.csv("fields.csv", _write_fields_csv, seq, sim["field_points"])
    summary = {
        "gate": _gate_label(cfg),
        "detuning_khz": sim["detuning_khz"],
        "fidelity": f,
        "final_populations": {"p1": p1, "p0": p0, "pe": pe},
        "norm_drift": res.norm_drift,
        "steps_per_pair": steps,
        "peak_rabi_mhz": seq.peak_rabi(1) / TWO_PI,
        "peak_omega1_mhz": seq.peak_field("omega1", 1) / TWO_PI,
        "sequence": seq.to_dict(),
    }
    run.json("summary.json", summary)
    print(f"fidelity {f:.12f}  populations p1={p1:.6f} p0={p0:.6f} pe={pe:.3e}  "
          f"drift {res.norm_drift:.1e}")
    return 0


def cmd_sweep(cfg, base, run: RunDir) -> int:
    seq = sequence_from_config(cfg, base)
    sw = cfg["sweep"]
    curve = sweep_detuning(seq.params, seq.pair1.envelope, sw["delta_max_khz"], sw["points"],
                           t2=seq.t2, initial=initial_from_config(cfg), label="optimized")
    run.csv("curve.csv", write_curves_csv, curve)
    summary = {"gate": _gate_label(cfg), "threshold": sw["threshold"],
               "peak_rabi_mhz": seq.peak_rabi(1) / TWO_PI,
               "min_fidelity": float(curve.fidelity.min()),
               **_bandwidth_summary(curve, sw["threshold"])}
    run.json("summary.json", summary)
    bw = summary["bandwidth_khz"]
    print(f"{sw['threshold']:g}-bandwidth: "
          + ("none" if bw is None else f"[{bw[0]:.1f}, {bw[1]:.1f}] kHz")
          + f"  peak Rabi {summary['peak_rabi_mhz']:.3f} MHz")
    return 0


def cmd_compare(cfg, base, run: RunDir) -> int:
    seq = sequence_from_config(cfg, base)
    sw = cfg["sweep"]
    coeffs = np.asarray(seq.pair1.envelope.coeffs)
    curves = compare_baselines(seq.params, coeffs, sw["delta_max_khz"], sw["points"],
                               t1=seq.t1, initial=initial_from_config(cfg))
    run.csv("curves.csv", write_curves_csv, list(curves.values()))
    summary = {"gate": _gate_label(cfg), "threshold": sw["threshold"],
               "t_fwhm_us": measure_fwhm(seq.pair1.envelope).width,
               "curves": {k: _bandwidth_summary(c, sw["threshold"]) for k, c in curves.items()}}
    run.json("summary.json", summary)
    for k, s in summary["curves"].items():
        bw = s["bandwidth_khz"]
        print(f"{k:10s} " + ("none" if bw is None else f"[{bw[0]:.1f}, {bw[1]:.1f}] kHz"))
    return 0


def cmd_heatmap(cfg, base, run: RunDir) -> int:
    seq = sequence_from_config(cfg, base)
    hm = cfg["heatmap"]
    coeffs = np.asarray(seq.pair1.envelope.coeffs)
    rmap = a2_robustness_map(seq.params, coeffs, hm["eta_max"], hm["delta_max_khz"],
                             hm["eta_points"], hm["delta_points"], seq.t1,
                             initial_from_config(cfg), level=hm["level"],
                             perturb_compensation=hm["perturb_compensation"])
    run.csv("map.csv", write_map_csv, rmap)
    run.csv("contour.csv", write_contour_csv, rmap)
    summary = {
        "gate": _gate_label(cfg),
        "level": hm["level"],
        "contour_segments": len(rmap.contour),
        "zero_detuning_max_deviation": float(np.max(np.abs(1.0 - rmap.zero_detuning_column()))),
        "min_fidelity": float(rmap.fidelity.min()),
    }
    if hm["eta_max"] >= 0.3 and hm["delta_max_khz"] >= 60.0:
        summary["min_fidelity_eta30_delta60"] = rmap.min_in_rectangle(0.3, 60.0)
    run.json("summary.json", summary)
    print(f"contour segments {summary['contour_segments']}, "
          f"max |1 - F(eta, 0)| {summary['zero_detuning_max_deviation']:.1e}")
    return 0


def cmd_optimize(cfg, base, run: RunDir) -> int:
    opt = cfg["optimizer"]
    gate = gate_from_config(cfg)
    cap = opt["rabi_cap_mhz"]
    spec = ObjectiveSpec.from_band_khz(
        gate, opt["band_khz"], opt["points"], initial=initial_from_config(cfg), t1=cfg["t1_us"],
        rabi_cap=None if cap is None else TWO_PI * cap, steps_per_pair=opt["steps_per_pair"])
    settings = OptimizerSettings(max_iter=opt["max_iter"], xatol=opt["xatol"],
                                 fatol=opt["fatol"], restarts=opt["restarts"],
                                 seed=cfg["seed"], goal=opt["goal"])
    # warm start: the configured coefficient row (default Op1)
    try:
        init = project_free_dofs(coeffs_from_config(cfg, base), GATE_PAIR)
    except ValueError as exc:
        raise ConfigError(f"field 'coefficients': {exc}") from exc
    report = optimize(spec, init, settings)
    run.json("report.json", report.to_dict())
    run.json("coefficients.json", {"coeffs": report.coeffs, "gate": report.gate,
                                   "t1_us": report.t1_us})
    print(f"worst infidelity {report.worst_infidelity:.6g} "
          f"(fine grid {report.fine_worst_infidelity}), converged={report.converged}, "
          f"peak Rabi {report.peak_rabi_mhz:.3f} MHz")
    return 0


def cmd_export_awg(cfg, base, run: RunDir) -> int:
    awg = cfg["awg"]
    missing = [k for k in ("f1_mhz", "f0_mhz", "f10_mhz", "sample_rate_msps") if k not in awg]
    if missing:
        raise ConfigError(f"field 'awg': missing {', '.join(missing)} (no hardware defaults)")
    try:
        spec = RfSpec(awg["f1_mhz"], awg["f0_mhz"], awg["f10_mhz"], awg["conversion"],
                      awg["sample_rate_msps"])
        spec.check_aliasing()
    except ValueError as exc:
        raise ConfigError(f"field 'awg': {exc}") from exc
    seq = sequence_from_config(cfg, base)
    wave = synthesize(seq, spec, combine=awg["combine"])
    name = "waveform.csv" if awg["format"] == "csv" else "waveform.f32"
    path = export(wave, run.path / name, awg["format"])
    run.add(path)
    if awg["format"] == "f32":
        run.add(sidecar_path(path))
    summary = {"gate": _gate_label(cfg), "n_samples": wave.n_samples,
               "channels": list(wave.channels), "duration_us": wave.duration,
               "envelope": envelope_bandwidth(seq, spec)}
    run.json("summary.json", summary)
    print(f"wrote {wave.n_samples} samples x {len(wave.channels)} channel(s) to {path}")
    return 0


def cmd_verify(cfg, base, run: RunDir) -> int:
    preset = cfg["coefficients"]
    if not isinstance(preset, str):
        preset = preset.get("preset")
    if preset not in PRESETS:
        raise ConfigError("verify needs a preset coefficient source (--preset op1|op2)")
    results = run_suite(preset)
    for r in results:
        print(r.line())
    run.json("verify.json", [r.__dict__ for r in results])
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} checks passed")
    return 0 if n_fail == 0 else 1


COMMANDS = {
    "simulate": (cmd_simulate, "population trace and final fidelity (state evolution)"),
    "sweep": (cmd_sweep, "fidelity versus detuning and 0.99-bandwidth"),
    "compare": (cmd_compare, "optimized envelope against Gaussian and square baselines"),
    "heatmap": (cmd_heatmap, "fidelity over (a2 change, detuning) with the 0.99 contour"),
    "optimize": (cmd_optimize, "minimax coefficient search over a detuning band"),
    "export-awg": (cmd_export_awg, "two-tone RF waveform for an AWG"),
    "verify": (cmd_verify, "run the reproduction checks for a preset"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config (see CONFIG_SCHEMA)")
    common.add_argument("--gate", choices=sorted(GATE_ALIASES), help="named gate")
    common.add_argument("--preset", choices=sorted(PRESETS), help="published coefficient row")
    common.add_argument("--t1-us", type=float, help="gate-pair duration in us")
    common.add_argument("--seed", type=int, help="RNG seed (optimizer restarts)")
    common.add_argument("--out-dir", help="output directory (default: holopulse-out/<command>)")
    common.add_argument("--points", type=int,
                        help="grid size: detuning points (sweep, compare, heatmap), "
                             "objective points (optimize), field samples (simulate)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")

    parser = argparse.ArgumentParser(prog="holopulse", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, base = resolve_config(args)
        run = RunDir(args.out_dir or Path("holopulse-out") / args.command)
        code = COMMANDS[args.command][0](cfg, base, run)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    run.manifest(args.command, cfg)
    return code


if __name__ == "__main__":
    sys.exit(main())
