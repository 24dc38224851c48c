"""Scenario configuration: schema, validation, defaults, bundled files.

A scenario is one JSON document (``schema_version`` 1).  Units are fixed
across the schema: times in ns, frequencies in MHz, phases in radians,
voltages in V, rates in Hz.  Any phase-valued field ``X`` may instead be
given as ``X_pi_units`` (multiples of pi).  Keys starting with an
underscore are treated as comments and ignored.

Every default carries a provenance note (see PROVENANCE): values quoted
from the experiment, values derived by the shipped calibration fit, or
plain engineering choices.
"""

from __future__ import annotations

import importlib.resources
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .grid import TimeGrid
from .phase import (EomCalibration, PhaseProfile, linear_ramp_profile,
                    phase_from_voltage, ramp_frequency_shift_mhz,
                    sawtooth_profile, step_profile)
from .source import SourceConfig

SCHEMA_VERSION = 1

BUNDLED_SCENARIOS = (
    "ideal_hom",
    "fig2_pi_step",
    "fig3_sweep",
    "fig4a_ramp_11MHz",
    "fig4b_sawtooth_25MHz",
    "g2_reference",
)


class ConfigError(ValueError):
    """Scenario validation failure; message lists offending field paths."""


# defaults by section; values born from the calibration fit live in the
# bundled scenario files, not here
_SOURCE_DEFAULTS = {
    "rep_rate_khz": 740.0,
    "p_click": 0.07,
    "p_two_photon": 0.0,
    "fwhm_ns": 150.0,
    "sigma_nu_mhz": 0.0,
    "gamma_nu_mhz": 0.0,
    "amp_jitter": 0.0,
    "dark_rate_hz": 0.0,
    "det_jitter_ns": 0.0,
    "timing_resolution_ns": 2.0,
    "mode_overlap": 1.0,
}

_GRID_DEFAULTS = {"dt_ns": 0.5, "span_ns": 675.0}

_ANALYSIS_DEFAULTS = {
    "step_time_ns": 0.0,
    "rise_exclusion_ns": 5.0,
    "tail_cutoff_ns": 80.0,
    "beat_window_ns": 150.0,
    "beat_bin_ns": 5.0,
    "g2_bin_ns": 2.0,
    "max_lag": 6,
}

_RUN_DEFAULTS = {"n_trials": 1_000_000, "seed": 20100901, "out_dir": "out"}

PROVENANCE = {
    "source.rep_rate_khz": "[PAPER] photon generation rate of 740 kHz",
    "source.p_click": "[PAPER] per-trial photon probability of about 7%",
    "source.p_two_photon": "[DERIVED] fitted so the stream-autocorrelation "
                           "suppression and the 5% background offset match "
                           "(scripts/fit_calibration.py)",
    "source.fwhm_ns": "[PAPER] wave-packet intensity FWHM of 150 ns "
                      "(intensity, not field amplitude; see README)",
    "source.sigma_nu_mhz": "[DERIVED] fitted to the same-half coincidence "
                           "ratio (scripts/fit_calibration.py)",
    "source.gamma_nu_mhz": "[DERIVED] heavy-tailed frequency-offset "
                           "component; the offset distribution over the "
                           "emitting sublevels is unpublished, and a "
                           "Lorentzian part is needed to match the sweep "
                           "visibility together with the half ratios "
                           "(scripts/fit_calibration.py)",
    "source.amp_jitter": "[DERIVED] fitted jointly with the frequency "
                         "jitter; bounded by the beat-reference envelope "
                         "width (scripts/fit_calibration.py)",
    "source.dark_rate_hz": "[DERIVED] detector-noise share of the 5% "
                           "background (scripts/fit_calibration.py)",
    "source.det_jitter_ns": "choice: quantization only, no extra jitter",
    "source.timing_resolution_ns": "[PAPER] detection time resolution of 2 ns",
    "source.mode_overlap": "[PAPER] static spatial/polarization overlap "
                           "fidelity above 99% (amplitude factor 0.995)",
    "grid.dt_ns": "choice: well below the 2 ns timing resolution",
    "grid.span_ns": "choice: +/-675 ns covers +/-10.6 envelope sigma",
    "analysis.rise_exclusion_ns": "[PAPER] detections within +/-5 ns of the "
                                  "step are omitted",
    "analysis.tail_cutoff_ns": "[PAPER] detections beyond 80 ns from the "
                               "step are omitted",
    "phase.rise_time_ns": "choice: 10 ns transition, consistent with the "
                          "+/-5 ns exclusion window",
    "phase.fall_time_ns": "choice: 10% of the tooth period",
}


def _err(errors, path, msg):
    errors.append(f"{path}: {msg}")


def _expect_mapping(errors, obj, path):
    if not isinstance(obj, dict):
        _err(errors, path, f"expected an object, got {type(obj).__name__}")
        return False
    return True


def _strip_comments(obj):
    if isinstance(obj, dict):
        return {k: _strip_comments(v) for k, v in obj.items()
                if not k.startswith("_")}
    return obj


def _check_fields(errors, section, path, spec):
    """spec: name -> (types, predicate or None).  Unknown keys are errors."""
    for key in section:
        if key not in spec:
            _err(errors, f"{path}.{key}", "unknown field")
    for key, (types, pred, desc) in spec.items():
        if key not in section:
            continue
        v = section[key]
        if isinstance(v, bool) or not isinstance(v, types):
            _err(errors, f"{path}.{key}", f"expected {desc}")
        elif pred is not None and not pred(v):
            _err(errors, f"{path}.{key}", f"out of range: {v!r}")


_NUM = (int, float)


def _resolve_pi_units(errors, section, path, base_key, default=None):
    """Return the radian value of a field given either directly or in
    pi units (not both)."""
    pi_key = base_key + "_pi_units"
    has_rad, has_pi = base_key in section, pi_key in section
    if has_rad and has_pi:
        _err(errors, f"{path}.{base_key}",
             f"give either {base_key} or {pi_key}, not both")
        return default
    if has_pi:
        v = section.pop(pi_key)
        if isinstance(v, bool) or not isinstance(v, _NUM):
            _err(errors, f"{path}.{pi_key}", "expected a number")
            return default
        section[base_key] = float(v) * math.pi
        return section[base_key]
    if has_rad:
        v = section[base_key]
        if isinstance(v, bool) or not isinstance(v, _NUM):
            _err(errors, f"{path}.{base_key}", "expected a number")
            return default
        return float(v)
    if default is not None:
        section[base_key] = default
    return default


@dataclass
class Scenario:
    """Fully validated and defaulted scenario."""

    name: str
    mode: str
    source: SourceConfig
    grid: TimeGrid
    phase_spec: dict
    analysis: dict
    run: dict
    sweep_phases: list[float] | None
    beat_delta_nu_mhz: float | None
    raw: dict

    def phase_profile(self, delta_phi: float | None = None) -> PhaseProfile | None:
        """Build the modulator drive.

        A delta_phi override (used by phase sweeps) replaces the step
        height; a scenario without a drive gets a default step at the
        analysis step time.
        """
        if delta_phi is not None and self.phase_spec["type"] == "none":
            return step_profile(self.analysis["step_time_ns"], delta_phi)
        if delta_phi is not None and self.phase_spec["type"] not in ("step",):
            raise ConfigError(
                "phase sweeps need a step (or absent) drive, not "
                f"{self.phase_spec['type']!r}")
        return build_phase_profile(self.phase_spec, delta_phi)

    def resolved_dict(self) -> dict:
        """Round-trippable echo of the scenario with all defaults filled."""
        return json.loads(json.dumps(self.raw))


def build_phase_profile(spec: dict, delta_phi: float | None = None):
    kind = spec["type"]
    if kind == "none":
        return None
    if kind == "step":
        return step_profile(spec["t_step_ns"],
                            spec["delta_phi"] if delta_phi is None else delta_phi,
                            spec["rise_time_ns"])
    if kind == "ramp":
        return linear_ramp_profile(spec["t_start_ns"], spec["duration_ns"],
                                   spec["total_phase"])
    if kind == "sawtooth":
        return sawtooth_profile(spec["t_start_ns"], spec["tooth_period_ns"],
                                spec["n_teeth"], spec["tooth_phase"],
                                spec["fall_time_ns"])
    if kind == "voltage_csv":
        from .io import read_voltage_trace
        t, v = read_voltage_trace(spec["path"])
        return phase_from_voltage(t, v, EomCalibration(spec["v_pi"]))
    raise ConfigError(f"phase.type: unknown type {kind!r}")


def implied_delta_nu_mhz(spec: dict) -> float | None:
    """Frequency shift implied by a ramp or sawtooth drive (MHz)."""
    if spec["type"] == "ramp":
        return ramp_frequency_shift_mhz(spec["duration_ns"], spec["total_phase"])
    if spec["type"] == "sawtooth":
        return ramp_frequency_shift_mhz(spec["tooth_period_ns"],
                                        spec["tooth_phase"])
    return None


def validate_scenario(doc: dict, name_hint: str = "scenario") -> Scenario:
    """Validate a scenario document and fill defaults.

    Raises:
        ConfigError: listing every offending field path.
    """
    errors: list[str] = []
    if not _expect_mapping(errors, doc, "$"):
        raise ConfigError("; ".join(errors))
    doc = _strip_comments(doc)

    known_top = {"schema_version", "name", "mode", "source", "phase", "grid",
                 "analysis", "run", "sweep", "beat"}
    for key in doc:
        if key not in known_top:
            _err(errors, f"$.{key}", "unknown section")

    if doc.get("schema_version") != SCHEMA_VERSION:
        _err(errors, "$.schema_version",
             f"must be {SCHEMA_VERSION}, got {doc.get('schema_version')!r}")

    name = doc.get("name", name_hint)
    if not isinstance(name, str):
        _err(errors, "$.name", "expected a string")
        name = name_hint

    mode = doc.get("mode", "interferometer")
    if mode not in ("interferometer", "hbt"):
        _err(errors, "$.mode", f"must be 'interferometer' or 'hbt', got {mode!r}")

    source = dict(_SOURCE_DEFAULTS)
    sec = doc.get("source", {})
    if _expect_mapping(errors, sec, "$.source"):
        _check_fields(errors, sec, "$.source", {
            "rep_rate_khz": (_NUM, lambda v: v > 0, "a number > 0"),
            "p_click": (_NUM, lambda v: 0 <= v <= 1, "a probability"),
            "p_two_photon": (_NUM, lambda v: 0 <= v <= 1, "a probability"),
            "fwhm_ns": (_NUM, lambda v: v > 0, "a number > 0"),
            "sigma_nu_mhz": (_NUM, lambda v: v >= 0, "a number >= 0"),
            "gamma_nu_mhz": (_NUM, lambda v: v >= 0, "a number >= 0"),
            "amp_jitter": (_NUM, lambda v: v >= 0, "a number >= 0"),
            "dark_rate_hz": (_NUM, lambda v: v >= 0, "a number >= 0"),
            "det_jitter_ns": (_NUM, lambda v: v >= 0, "a number >= 0"),
            "timing_resolution_ns": (_NUM, lambda v: v >= 0, "a number >= 0"),
            "mode_overlap": (_NUM, lambda v: 0 <= v <= 1, "a factor in [0, 1]"),
        })
        source.update({k: float(v) for k, v in sec.items() if k in source})
    if source["p_two_photon"] > source["p_click"]:
        _err(errors, "$.source.p_two_photon", "cannot exceed p_click")

    grid = dict(_GRID_DEFAULTS)
    sec = doc.get("grid", {})
    if _expect_mapping(errors, sec, "$.grid"):
        _check_fields(errors, sec, "$.grid", {
            "dt_ns": (_NUM, lambda v: v > 0, "a number > 0"),
            "span_ns": (_NUM, lambda v: v > 0, "a number > 0"),
        })
        grid.update({k: float(v) for k, v in sec.items() if k in grid})

    phase = doc.get("phase", {"type": "none"})
    phase = dict(phase) if isinstance(phase, dict) else phase
    if _expect_mapping(errors, phase, "$.phase"):
        kind = phase.get("type", "none")
        phase["type"] = kind
        specs = {
            "none": {},
            "step": {
                "t_step_ns": (_NUM, None, "a number"),
                "delta_phi": (_NUM, None, "a number"),
                "rise_time_ns": (_NUM, lambda v: v >= 0, "a number >= 0"),
            },
            "ramp": {
                "t_start_ns": (_NUM, None, "a number"),
                "duration_ns": (_NUM, lambda v: v > 0, "a number > 0"),
                "total_phase": (_NUM, None, "a number"),
            },
            "sawtooth": {
                "t_start_ns": (_NUM, None, "a number"),
                "tooth_period_ns": (_NUM, lambda v: v > 0, "a number > 0"),
                "n_teeth": (int, lambda v: v >= 1, "an integer >= 1"),
                "tooth_phase": (_NUM, None, "a number"),
                "fall_time_ns": (_NUM, lambda v: v >= 0, "a number >= 0"),
            },
            "voltage_csv": {
                "path": (str, None, "a path string"),
                "v_pi": (_NUM, lambda v: v > 0, "a number > 0"),
            },
        }
        if kind not in specs:
            _err(errors, "$.phase.type", f"unknown type {kind!r}")
        else:
            if kind == "step":
                _resolve_pi_units(errors, phase, "$.phase", "delta_phi", math.pi)
                phase.setdefault("t_step_ns", 0.0)
                phase.setdefault("rise_time_ns", 10.0)
            elif kind == "ramp":
                _resolve_pi_units(errors, phase, "$.phase", "total_phase")
                if "total_phase" not in phase:
                    _err(errors, "$.phase.total_phase", "required for ramps")
            elif kind == "sawtooth":
                _resolve_pi_units(errors, phase, "$.phase", "tooth_phase",
                                  2.0 * math.pi)
                phase.setdefault("fall_time_ns", 4.0)
                for req in ("t_start_ns", "tooth_period_ns", "n_teeth"):
                    if req not in phase:
                        _err(errors, f"$.phase.{req}", "required for sawtooth")
            elif kind == "voltage_csv":
                for req in ("path", "v_pi"):
                    if req not in phase:
                        _err(errors, f"$.phase.{req}", "required for voltage_csv")
            spec_fields = dict(specs.get(kind, {}))
            spec_fields["type"] = (str, None, "a string")
            _check_fields(errors, phase, "$.phase", spec_fields)
        if kind == "sawtooth" and not errors:
            if phase["fall_time_ns"] >= phase["tooth_period_ns"]:
                _err(errors, "$.phase.fall_time_ns",
                     "must be smaller than tooth_period_ns")

    analysis = dict(_ANALYSIS_DEFAULTS)
    sec = doc.get("analysis", {})
    if _expect_mapping(errors, sec, "$.analysis"):
        _check_fields(errors, sec, "$.analysis", {
            "step_time_ns": (_NUM, None, "a number"),
            "rise_exclusion_ns": (_NUM, lambda v: v >= 0, "a number >= 0"),
            "tail_cutoff_ns": (_NUM, lambda v: v > 0, "a number > 0"),
            "beat_window_ns": (_NUM, lambda v: v > 0, "a number > 0"),
            "beat_bin_ns": (_NUM, lambda v: v > 0, "a number > 0"),
            "g2_bin_ns": (_NUM, lambda v: v > 0, "a number > 0"),
            "max_lag": (int, lambda v: v >= 2, "an integer >= 2"),
        })
        for k in analysis:
            if k in sec:
                analysis[k] = float(sec[k]) if k != "max_lag" else int(sec[k])

    run = dict(_RUN_DEFAULTS)
    sec = doc.get("run", {})
    if _expect_mapping(errors, sec, "$.run"):
        _check_fields(errors, sec, "$.run", {
            "n_trials": (int, lambda v: v >= 0, "an integer >= 0"),
            "seed": (int, lambda v: 0 <= v < 2**64, "an integer in [0, 2^64)"),
            "out_dir": (str, None, "a path string"),
        })
        run.update({k: sec[k] for k in run if k in sec})

    sweep_phases = None
    if "sweep" in doc:
        sec = doc["sweep"]
        if _expect_mapping(errors, sec, "$.sweep"):
            if "phases_pi_units" in sec:
                vals = sec["phases_pi_units"]
                if not isinstance(vals, list) or not all(
                        isinstance(v, _NUM) and not isinstance(v, bool)
                        for v in vals):
                    _err(errors, "$.sweep.phases_pi_units",
                         "expected a list of numbers")
                else:
                    sweep_phases = [float(v) * math.pi for v in vals]
            elif "phases" in sec:
                vals = sec["phases"]
                if not isinstance(vals, list) or not all(
                        isinstance(v, _NUM) and not isinstance(v, bool)
                        for v in vals):
                    _err(errors, "$.sweep.phases", "expected a list of numbers")
                else:
                    sweep_phases = [float(v) for v in vals]
            for key in sec:
                if key not in ("phases", "phases_pi_units"):
                    _err(errors, f"$.sweep.{key}", "unknown field")

    beat_delta_nu = None
    if "beat" in doc:
        sec = doc["beat"]
        if _expect_mapping(errors, sec, "$.beat"):
            _check_fields(errors, sec, "$.beat", {
                "delta_nu_mhz": (_NUM, lambda v: v >= 0, "a number >= 0"),
            })
            if "delta_nu_mhz" in sec:
                beat_delta_nu = float(sec["delta_nu_mhz"])

    if errors:
        raise ConfigError("invalid scenario: " + "; ".join(errors))

    src = SourceConfig(**source)
    tgrid = TimeGrid.symmetric(grid["span_ns"], grid["dt_ns"])
    resolved = {
        "schema_version": SCHEMA_VERSION,
        "name": name,
        "mode": mode,
        "source": source,
        "phase": phase,
        "grid": grid,
        "analysis": analysis,
        "run": dict(run),
    }
    if sweep_phases is not None:
        resolved["sweep"] = {"phases": sweep_phases}
    if beat_delta_nu is not None:
        resolved["beat"] = {"delta_nu_mhz": beat_delta_nu}

    return Scenario(name=name, mode=mode, source=src, grid=tgrid,
                    phase_spec=phase, analysis=analysis, run=dict(run),
                    sweep_phases=sweep_phases,
                    beat_delta_nu_mhz=beat_delta_nu, raw=resolved)


def load_scenario(path_or_name: str | Path) -> Scenario:
    """Load a scenario from a JSON file or a bundled scenario name."""
    p = Path(path_or_name)
    if p.suffix == ".json" or p.exists():
        try:
            doc = json.loads(p.read_text())
        except FileNotFoundError:
            raise ConfigError(f"scenario file not found: {p}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON: {exc}")
        return validate_scenario(doc, name_hint=p.stem)
    name = str(path_or_name)
    if name in BUNDLED_SCENARIOS:
        text = importlib.resources.files("homsim.scenarios").joinpath(
            f"{name}.json").read_text()
        return validate_scenario(json.loads(text), name_hint=name)
    raise ConfigError(
        f"scenario {name!r} is neither a file nor one of the bundled "
        f"scenarios {', '.join(BUNDLED_SCENARIOS)}")
