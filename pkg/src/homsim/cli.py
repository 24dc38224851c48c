"""Command-line front end.

Subcommands: simulate, sweep-phase, beat, analyze.  Scenario files or
bundled scenario names are passed with --config; --seed/--trials/--out
override the scenario's run section.  Every flag can also be supplied
through an environment variable with the HOMSIM_ prefix (HOMSIM_SEED,
HOMSIM_TRIALS, HOMSIM_OUT, HOMSIM_FORMAT); precedence is flag, then
environment, then scenario file.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

from . import analysis as ana
from . import io as hio
from . import report
from .coincidence import build_pairs
from .detection import EventLog, run_experiment
from .quadrature import nominal_densities, quadrature_half_ratios
from .scenario import (BUNDLED_SCENARIOS, PROVENANCE, ConfigError, Scenario,
                       implied_delta_nu_mhz, load_scenario)

ENV_PREFIX = "HOMSIM_"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _env(name):
    return os.environ.get(ENV_PREFIX + name)


def _resolve_run_options(args) -> dict:
    """Flag > environment > scenario file."""
    out = {}
    seed = args.seed if args.seed is not None else _env("SEED")
    trials = args.trials if args.trials is not None else _env("TRIALS")
    outdir = args.out if args.out is not None else _env("OUT")
    fmt = args.format if args.format is not None else (_env("FORMAT") or "csv")
    if seed is not None:
        out["seed"] = int(seed)
    if trials is not None:
        out["n_trials"] = int(trials)
    if outdir is not None:
        out["out_dir"] = str(outdir)
    if fmt not in ("csv", "json"):
        raise ConfigError(f"--format must be csv or json, got {fmt!r}")
    out["format"] = fmt
    return out


def _load(args) -> tuple[Scenario, dict]:
    config = args.config if args.config is not None else _env("CONFIG")
    if config is None:
        raise ConfigError("--config is required (path or one of: "
                          + ", ".join(BUNDLED_SCENARIOS) + ")")
    scenario = load_scenario(config)
    opts = _resolve_run_options(args)
    run = dict(scenario.run)
    run.update({k: v for k, v in opts.items() if k in ("seed", "n_trials",
                                                       "out_dir")})
    scenario.run = run
    scenario.raw["run"] = dict(run)
    return scenario, opts


def _write_common(scenario: Scenario, out_dir: Path, events: EventLog,
                  summary: dict):
    out_dir.mkdir(parents=True, exist_ok=True)
    tmp = out_dir / "events.csv.tmp"
    with open(tmp, "w", newline="") as f:
        events.to_csv(f)
    os.replace(tmp, out_dir / "events.csv")
    resolved = scenario.resolved_dict()
    resolved["_provenance"] = dict(PROVENANCE)
    hio.write_json(out_dir / "resolved_config.json", resolved)
    hio.write_json(out_dir / "summary.json", summary)


def cmd_simulate(args) -> int:
    scenario, opts = _load(args)
    out_dir = Path(scenario.run["out_dir"])
    events = run_experiment(scenario.source, scenario.run["n_trials"],
                            scenario.run["seed"], scenario.phase_profile(),
                            mode=scenario.mode)
    summary = report.build_summary(events, scenario)
    _write_common(scenario, out_dir, events, summary)
    if args.dump_density:
        jd, _ = nominal_densities(scenario)
        hio.save_density(jd, out_dir / "density", fmt=args.dump_density)
    print(f"simulate: {len(events)} events -> {out_dir}/events.csv")
    if "half_ratios" in summary:
        hr = summary["half_ratios"]
        print("  same-half ratio:  %s" % _fmt_ratio(hr["same"]["raw"]))
        print("  cross-half ratio: %s" % _fmt_ratio(hr["cross"]["raw"]))
        print("  integrated ratio: %s" % _fmt_ratio(hr["all"]["raw"]))
    g2 = summary["g2"]
    if g2.get("central_suppression_pct") is not None:
        print(f"  central-peak suppression: {g2['central_suppression_pct']:.2f}%")
    return EXIT_OK


def _fmt_ratio(section) -> str:
    if section.get("ratio") is None:
        return "undefined (%s)" % section.get("undefined", "no counts")
    return "%.4f +/- %.4f" % (section["ratio"], section["error"])


def _sweep_phases(args, scenario: Scenario):
    if args.phases_pi:
        return [float(x) * math.pi for x in args.phases_pi.split(",")]
    if args.phases:
        return [float(x) for x in args.phases.split(",")]
    if scenario.sweep_phases:
        return list(scenario.sweep_phases)
    raise ConfigError("no phase list: give --phases/--phases-pi or a "
                      "sweep section in the scenario")


def cmd_sweep_phase(args) -> int:
    scenario, opts = _load(args)
    phases = _sweep_phases(args, scenario)
    out_dir = Path(scenario.run["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    points_cross, points_same = [], []
    for k, phi in enumerate(phases):
        if args.engine == "mc":
            events = run_experiment(
                scenario.source, scenario.run["n_trials"],
                scenario.run["seed"] + k, scenario.phase_profile(phi),
                mode=scenario.mode)
            summary = report.build_summary(events, scenario, delta_phi=phi)
            same = summary["half_ratios"]["same"]["raw"]
            cross = summary["half_ratios"]["cross"]["raw"]
            row = (phi, phi / math.pi,
                   cross["ratio"], cross["error"], same["ratio"],
                   same["error"], cross["n_selected"], same["n_selected"])
        else:
            ratios = quadrature_half_ratios(scenario, delta_phi=phi)
            row = (phi, phi / math.pi, ratios["cross"], 0.0, ratios["same"],
                   0.0, 0, 0)
        rows.append(row)
        if row[2] is not None:
            points_cross.append((phi, row[2], row[3]))
        if row[4] is not None:
            points_same.append((phi, row[4], row[5]))
        print(f"  dphi = {phi / math.pi:5.2f} pi: cross = {row[2]}, "
              f"same = {row[4]}")

    header = ["delta_phi_rad", "delta_phi_pi", "cross_ratio", "cross_error",
              "same_ratio", "same_error", "n_cross", "n_same"]
    table_path = hio.write_table(out_dir / "sweep_table", header, rows,
                                 opts["format"])
    fit = ana.fit_visibility(points_cross)
    fit_doc = {
        "engine": args.engine,
        "n_points": len(points_cross),
        "converged": fit.converged,
        "visibility": None if not fit.converged else fit.v,
        "baseline": None if not fit.converged else fit.baseline,
        "amplitude": None if not fit.converged else fit.amplitude,
        "visibility_maxmin": None if not fit.converged else fit.v_maxmin,
    }
    if len(points_same) >= 2:
        slope, slope_err = ana.fit_flat_slope(points_same)
        fit_doc["same_half_slope_per_rad"] = slope
        fit_doc["same_half_slope_error"] = slope_err
    hio.write_json(out_dir / "visibility_fit.json", fit_doc)
    if fit.converged:
        print(f"sweep-phase: visibility = {fit.v:.4f} "
              f"(baseline {fit.baseline:.4f}) -> {table_path}")
    else:
        print(f"sweep-phase: fit refused (need >= 4 points over a full "
              f"period) -> {table_path}")
    return EXIT_OK


def cmd_beat(args) -> int:
    scenario, opts = _load(args)
    implied = implied_delta_nu_mhz(scenario.phase_spec)
    direct = args.delta_nu if args.delta_nu is not None else \
        scenario.beat_delta_nu_mhz
    if direct is None and implied is None:
        raise ConfigError("no frequency shift: give --delta-nu or a ramp/"
                          "sawtooth phase section")
    if direct is not None and implied is not None:
        if abs(direct - implied) > 1e-6 * max(abs(direct), abs(implied), 1.0):
            raise ConfigError(
                f"inconsistent frequency shift: --delta-nu/beat gives "
                f"{direct} MHz but the drive implies {implied:.6f} MHz")
    delta_nu = direct if direct is not None else implied

    out_dir = Path(scenario.run["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    events = run_experiment(scenario.source, scenario.run["n_trials"],
                            scenario.run["seed"], scenario.phase_profile(),
                            mode=scenario.mode)
    a = scenario.analysis
    pairs = build_pairs(events, scenario.source.rep_period_ns,
                        int(a["max_lag"]))
    overlay = ana.beat_overlay(
        pairs, delta_nu, scenario.source.fwhm_ns, a["beat_window_ns"],
        a["beat_bin_ns"],
        timing_resolution_ns=scenario.source.timing_resolution_ns)
    header, rows = report.beat_table(overlay)
    table_path = hio.write_table(out_dir / "beat_histogram", header, rows,
                                 opts["format"])
    doc = {
        "delta_nu_mhz": delta_nu,
        "implied_delta_nu_mhz": implied,
        "ref_amplitude": overlay.ref_amplitude,
        "envelope_fwhm_ns": overlay.envelope_fwhm_ns,
        "envelope_fwhm_err_ns": overlay.envelope_fwhm_err_ns,
        "n_central_pairs": int(overlay.measured.sum()),
    }
    if delta_nu > 0 and overlay.measured.sum() >= 50:
        try:
            f, f_err, tau0, tau0_err = ana.fit_beat_oscillation(overlay)
            doc["fitted_beat_mhz"] = 1e3 * f
            doc["fitted_beat_err_mhz"] = 1e3 * f_err
            doc["fitted_tau_offset_ns"] = tau0
            doc["fitted_tau_offset_err_ns"] = tau0_err
        except RuntimeError:
            doc["fit_failed"] = True
    hio.write_json(out_dir / "beat_summary.json", doc)
    print(f"beat: delta_nu = {delta_nu:g} MHz, "
          f"{int(overlay.measured.sum())} central pairs -> {table_path}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    scenario, opts = _load(args)
    try:
        events = EventLog.from_csv(args.events)
    except FileNotFoundError:
        raise ConfigError(f"event log not found: {args.events}")
    except ValueError as exc:
        raise ConfigError(f"{args.events}: {exc}")
    out_dir = Path(scenario.run["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = report.build_summary(events, scenario)
    hio.write_json(out_dir / "summary.json", summary)

    rows = []
    if "half_ratios" in summary:
        for pairing in ("same", "cross", "all"):
            for variant, sec in summary["half_ratios"][pairing].items():
                if variant == "delta_phi" or not isinstance(sec, dict):
                    continue
                rows.append((pairing, variant, sec.get("ratio"),
                             sec.get("error"), sec.get("n_selected")))
    header = ["pairing", "variant", "ratio", "error", "n_pairs"]
    hio.write_table(out_dir / "analysis_ratios", header, rows, opts["format"])
    g2_rows = [(n, c) for n, c in sorted(
        ((int(k), v) for k, v in summary["g2"]["peak_counts"].items()))]
    hio.write_table(out_dir / "g2_peaks", ["peak", "counts"], g2_rows,
                    opts["format"])
    print(f"analyze: {len(events)} events -> {out_dir}/summary.json")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="homsim",
        description="Two-photon interference simulator with single-photon "
                    "phase shaping")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="scenario JSON path or bundled name")
        sp.add_argument("--seed", type=int, help="master seed (u64)")
        sp.add_argument("--trials", type=int, help="number of trials")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--format", choices=("csv", "json"),
                        help="table format (default csv)")

    sp = sub.add_parser("simulate", help="run one scenario, write the event "
                                         "log and summary")
    common(sp)
    sp.add_argument("--dump-density", choices=("raw", "csv"),
                    help="also export the nominal joint density")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep-phase", help="repeat the run over a list of "
                                            "step phases and fit visibility")
    common(sp)
    sp.add_argument("--phases", help="comma-separated phases (rad)")
    sp.add_argument("--phases-pi", help="comma-separated phases (pi units)")
    sp.add_argument("--engine", choices=("mc", "quadrature"), default="mc",
                    help="Monte Carlo run or exact integration")
    sp.set_defaults(func=cmd_sweep_phase)

    sp = sub.add_parser("beat", help="quantum-beat run with a frequency-"
                                     "shifted photon")
    common(sp)
    sp.add_argument("--delta-nu", type=float,
                    help="frequency difference (MHz); must agree with the "
                         "drive when both are given")
    sp.set_defaults(func=cmd_beat)

    sp = sub.add_parser("analyze", help="run the analysis on an existing "
                                        "event CSV")
    common(sp)
    sp.add_argument("events", help="event log CSV path")
    sp.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
