"""Run summaries shared by the simulate and analyze commands.

The summary for a given event log and analysis settings is a pure
function of both, so analyzing an exported log reproduces the inline
summary of the run that created it, field for field.
"""

from __future__ import annotations

import hashlib

import numpy as np

from . import analysis as ana
from .coincidence import build_pairs, g2_histogram
from .detection import EventLog, ORIGIN_PHOTON
from .scenario import Scenario


def events_digest(events: EventLog) -> str:
    """Order-sensitive SHA-256 of the event columns (determinism checks)."""
    h = hashlib.sha256()
    h.update(events.trial.tobytes())
    h.update(events.port.tobytes())
    h.update(events.timestamp_ns.tobytes())
    h.update(events.origin.tobytes())
    return h.hexdigest()


def _ratio_section(hist, pairing, step_time, rise, tail):
    pairs = hist.pairs
    out = {}
    masks = {
        "raw": None,
        "dark_excluded": ~pairs.involves_dark,
        "signal_only": ~(pairs.involves_dark | pairs.involves_extra),
    }
    for label, mask in masks.items():
        try:
            r = ana.normalized_rates(hist, pairing, step_time, rise, tail,
                                     pair_mask=mask)
            out[label] = {"ratio": r.ratio, "error": r.error,
                          "n_selected": r.n_selected,
                          "reference": r.reference}
        except ValueError as exc:
            out[label] = {"ratio": None, "error": None,
                          "undefined": str(exc)}
    return out


def build_summary(events: EventLog, scenario: Scenario,
                  delta_phi: float | None = None) -> dict:
    """Full analysis summary of an event log under a scenario's settings."""
    cfg = scenario.source
    a = scenario.analysis
    period = cfg.rep_period_ns
    pairs = build_pairs(events, period, int(a["max_lag"]))
    hist = g2_histogram(events, period, a["g2_bin_ns"],
                        max_lag=int(a["max_lag"]), pairs=pairs)

    n_photon = int(np.count_nonzero(events.origin == ORIGIN_PHOTON))
    n_dark = len(events) - n_photon
    # only CSV-representable facts belong here: analyzing an exported log
    # must reproduce this summary exactly
    summary = {
        "scenario": scenario.name,
        "mode": scenario.mode,
        "n_events": len(events),
        "n_photon_events": n_photon,
        "n_dark_events": n_dark,
        "events_sha256": events_digest(events),
        "g2": {
            "peak_counts": {str(n): hist.peak(n)
                            for n in sorted(hist.peak_counts)},
            "outer_peak_mean": hist.outer_peak_mean(),
        },
    }

    try:
        supp = ana.central_suppression(hist)
        undefined = n_photon == 0  # dark-only stream: number is meaningless
        summary["g2"]["central_suppression_pct"] = None if undefined else supp
        summary["g2"]["suppression_undefined"] = undefined
    except ValueError:
        summary["g2"]["central_suppression_pct"] = None
        summary["g2"]["suppression_undefined"] = True

    outer = hist.outer_peak_mean()
    if outer > 0:
        summary["g2"]["adjacent_peak_ratio"] = float(
            0.5 * (hist.peak(1) + hist.peak(-1)) / outer)
    else:
        summary["g2"]["adjacent_peak_ratio"] = None

    if scenario.phase_spec["type"] == "step" or delta_phi is not None:
        step_time = a["step_time_ns"]
        rise, tail = a["rise_exclusion_ns"], a["tail_cutoff_ns"]
        half = {}
        for pairing in ("same", "cross", "all"):
            half[pairing] = _ratio_section(hist, pairing, step_time, rise, tail)
        if delta_phi is not None:
            half["delta_phi"] = delta_phi
        elif scenario.phase_spec["type"] == "step":
            half["delta_phi"] = scenario.phase_spec["delta_phi"]
        summary["half_ratios"] = half

    delta_nu = scenario.beat_delta_nu_mhz
    if delta_nu is not None:
        overlay = ana.beat_overlay(
            pairs, delta_nu, cfg.fwhm_ns, a["beat_window_ns"],
            a["beat_bin_ns"], timing_resolution_ns=cfg.timing_resolution_ns)
        beat = {
            "delta_nu_mhz": delta_nu,
            "ref_amplitude": overlay.ref_amplitude,
            "envelope_fwhm_ns": overlay.envelope_fwhm_ns,
            "envelope_fwhm_err_ns": overlay.envelope_fwhm_err_ns,
        }
        if overlay.measured.sum() >= 50 and delta_nu > 0:
            try:
                f, f_err, tau0, tau0_err = ana.fit_beat_oscillation(overlay)
                beat["fitted_beat_mhz"] = 1e3 * f
                beat["fitted_beat_err_mhz"] = 1e3 * f_err
                beat["fitted_tau_offset_ns"] = tau0
                beat["fitted_tau_offset_err_ns"] = tau0_err
            except RuntimeError:
                beat["fit_failed"] = True
        summary["beat"] = beat

    return summary


def beat_table(overlay: ana.BeatOverlay):
    header = ["tau_ns", "measured_counts", "reference", "reference_fit",
              "predicted"]
    rows = [
        (float(t), int(m), float(r), float(rf), float(p))
        for t, m, r, rf, p in zip(overlay.tau_centers, overlay.measured,
                                  overlay.reference, overlay.reference_fit,
                                  overlay.predicted)
    ]
    return header, rows
