import json
import math

import numpy as np
import pytest

from homsim.cli import main
from homsim.detection import EventLog
from homsim.io import load_density, save_density
from homsim.quadrature import nominal_densities
from homsim.scenario import (BUNDLED_SCENARIOS, ConfigError, load_scenario,
                             validate_scenario)


def minimal_doc(**over):
    doc = {
        "schema_version": 1,
        "name": "test",
        "source": {"p_click": 0.1},
        "phase": {"type": "step", "delta_phi_pi_units": 1.0},
        "run": {"n_trials": 1000, "seed": 1, "out_dir": "out"},
    }
    doc.update(over)
    return doc


def test_bundled_scenarios_load_and_validate():
    for name in BUNDLED_SCENARIOS:
        scn = load_scenario(name)
        assert scn.name == name
        assert scn.source.rep_rate_khz == 740.0


def test_calibrated_scenarios_share_one_source():
    sources = set()
    for name in BUNDLED_SCENARIOS:
        if name == "ideal_hom":
            continue
        scn = load_scenario(name)
        sources.add(json.dumps(scn.raw["source"], sort_keys=True))
    assert len(sources) == 1


def test_validation_reports_field_paths():
    doc = minimal_doc()
    doc["source"]["p_click"] = 1.5
    doc["phase"] = {"type": "step", "delta_phi": 1.0, "bogus": 2}
    doc["run"]["n_trials"] = -3
    with pytest.raises(ConfigError) as err:
        validate_scenario(doc)
    msg = str(err.value)
    assert "$.source.p_click" in msg
    assert "$.phase.bogus" in msg
    assert "$.run.n_trials" in msg


def test_validation_rejects_unknown_section_and_version():
    with pytest.raises(ConfigError, match="schema_version"):
        validate_scenario(minimal_doc(schema_version=99))
    with pytest.raises(ConfigError, match="unknown section"):
        validate_scenario(minimal_doc(extra={}))


def test_pi_units_exclusive():
    doc = minimal_doc()
    doc["phase"] = {"type": "step", "delta_phi": 3.14,
                    "delta_phi_pi_units": 1.0}
    with pytest.raises(ConfigError, match="not both"):
        validate_scenario(doc)


def test_pi_units_resolve():
    scn = validate_scenario(minimal_doc())
    assert scn.phase_spec["delta_phi"] == pytest.approx(math.pi)
    doc = minimal_doc()
    doc["phase"] = {"type": "ramp", "t_start_ns": -100.0,
                    "duration_ns": 200.0, "total_phase_pi_units": 4.4}
    scn = validate_scenario(doc)
    assert scn.phase_spec["total_phase"] == pytest.approx(4.4 * math.pi)


def test_resolved_config_roundtrip():
    scn = load_scenario("fig2_pi_step")
    echo = scn.resolved_dict()
    again = validate_scenario(json.loads(json.dumps(echo)))
    assert again.resolved_dict() == echo


def test_underscore_keys_ignored():
    doc = minimal_doc()
    doc["_note"] = "hello"
    doc["source"]["_why"] = ["because"]
    scn = validate_scenario(doc)
    assert scn.source.p_click == 0.1


def run_cli(*argv):
    return main([str(a) for a in argv])


def test_simulate_outputs_and_determinism(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        code = run_cli("simulate", "--config", "ideal_hom",
                       "--trials", 50_000, "--seed", 7, "--out", out)
        assert code == 0
    assert (out1 / "events.csv").read_bytes() == (out2 / "events.csv").read_bytes()
    assert (out1 / "summary.json").read_bytes() == (out2 / "summary.json").read_bytes()
    resolved = json.loads((out1 / "resolved_config.json").read_text())
    assert resolved["run"]["seed"] == 7
    assert "_provenance" in resolved
    summary = json.loads((out1 / "summary.json").read_text())
    assert summary["g2"]["peak_counts"]["0"] == 0  # perfect coalescence


def test_simulate_exit_codes(tmp_path):
    assert run_cli("simulate", "--config", tmp_path / "nope.json") == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(minimal_doc(schema_version=2)))
    assert run_cli("simulate", "--config", bad) == 2
    assert run_cli("simulate", "--config", "not_a_scenario") == 2


def test_analyze_matches_inline_summary(tmp_path):
    out = tmp_path / "sim"
    run_cli("simulate", "--config", "fig2_pi_step", "--trials", 150_000,
            "--out", out)
    out2 = tmp_path / "ana"
    code = run_cli("analyze", out / "events.csv", "--config", "fig2_pi_step",
                   "--trials", 150_000, "--out", out2)
    assert code == 0
    inline = json.loads((out / "summary.json").read_text())
    again = json.loads((out2 / "summary.json").read_text())
    assert inline == again
    assert (out2 / "analysis_ratios.csv").exists()
    assert (out2 / "g2_peaks.csv").exists()


def test_analyze_empty_log_no_crash(tmp_path):
    log = tmp_path / "empty.csv"
    log.write_text("trial,port,timestamp_ns,origin\n")
    out = tmp_path / "out"
    code = run_cli("analyze", log, "--config", "fig2_pi_step", "--out", out)
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_events"] == 0
    assert summary["g2"]["suppression_undefined"] is True


def test_analyze_dark_only_log_flags_suppression(tmp_path):
    rng = np.random.default_rng(0)
    n = 2000
    ev = EventLog(np.zeros(n, dtype=int), rng.integers(0, 2, n),
                  np.sort(rng.uniform(0, 5e6, n)), np.ones(n, dtype=int))
    log = tmp_path / "darks.csv"
    ev.to_csv(log)
    out = tmp_path / "out"
    assert run_cli("analyze", log, "--config", "g2_reference",
                   "--out", out) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["g2"]["suppression_undefined"] is True
    assert summary["g2"]["central_suppression_pct"] is None


def test_analyze_malformed_log_diagnostic(tmp_path, capsys):
    log = tmp_path / "bad.csv"
    log.write_text("trial,port,timestamp_ns,origin\n0,C,oops,photon\n")
    code = run_cli("analyze", log, "--config", "fig2_pi_step",
                   "--out", tmp_path / "o")
    assert code == 2
    assert "line 2" in capsys.readouterr().err


def test_sweep_single_point_refused_but_table_written(tmp_path):
    out = tmp_path / "sweep"
    code = run_cli("sweep-phase", "--config", "fig3_sweep", "--trials", 50_000,
                   "--out", out, "--phases-pi", "1.0")
    assert code == 0
    assert (out / "sweep_table.csv").exists()
    fit = json.loads((out / "visibility_fit.json").read_text())
    assert fit["converged"] is False
    assert fit["visibility"] is None


def test_sweep_quadrature_ideal_visibility(tmp_path):
    out = tmp_path / "sweepq"
    code = run_cli("sweep-phase", "--config", "ideal_hom", "--out", out,
                   "--engine", "quadrature",
                   "--phases-pi", "0,0.25,0.5,0.75,1,1.25,1.5,1.75,2,2.5,3")
    assert code == 0
    fit = json.loads((out / "visibility_fit.json").read_text())
    assert fit["converged"]
    assert fit["visibility"] == pytest.approx(1.0, abs=1e-9)


def test_beat_consistency_check(tmp_path):
    # drive implies 11 MHz; a contradictory explicit value is rejected
    code = run_cli("beat", "--config", "fig4a_ramp_11MHz", "--trials", 1000,
                   "--out", tmp_path / "b", "--delta-nu", 12.0)
    assert code == 2
    code = run_cli("beat", "--config", "fig4a_ramp_11MHz", "--trials", 100_000,
                   "--out", tmp_path / "b2", "--delta-nu", 11.0)
    assert code == 0
    doc = json.loads((tmp_path / "b2" / "beat_summary.json").read_text())
    assert doc["implied_delta_nu_mhz"] == pytest.approx(11.0)


def test_beat_sawtooth_implied_shift(tmp_path):
    code = run_cli("beat", "--config", "fig4b_sawtooth_25MHz", "--trials",
                   100_000, "--out", tmp_path / "b3")
    assert code == 0
    doc = json.loads((tmp_path / "b3" / "beat_summary.json").read_text())
    assert doc["delta_nu_mhz"] == pytest.approx(25.0)


def test_env_override_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv("HOMSIM_TRIALS", "1000")
    monkeypatch.setenv("HOMSIM_SEED", "99")
    out = tmp_path / "env"
    assert run_cli("simulate", "--config", "ideal_hom", "--out", out) == 0
    resolved = json.loads((out / "resolved_config.json").read_text())
    assert resolved["run"]["n_trials"] == 1000
    assert resolved["run"]["seed"] == 99
    # explicit flag beats the environment
    out2 = tmp_path / "env2"
    assert run_cli("simulate", "--config", "ideal_hom", "--out", out2,
                   "--seed", 5) == 0
    resolved = json.loads((out2 / "resolved_config.json").read_text())
    assert resolved["run"]["seed"] == 5


def test_json_table_format(tmp_path):
    out = tmp_path / "fmt"
    assert run_cli("sweep-phase", "--config", "fig3_sweep", "--trials", 30_000,
                   "--out", out, "--format", "json",
                   "--phases-pi", "0,1,2,3,0.5") == 0
    rows = json.loads((out / "sweep_table.json").read_text())
    assert isinstance(rows, list) and "cross_ratio" in rows[0]


def test_density_export_roundtrip(tmp_path):
    scn = load_scenario("ideal_hom")
    jd, _ = nominal_densities(scn)
    for fmt in ("raw", "csv"):
        base = tmp_path / f"dens_{fmt}"
        written = save_density(jd, base, fmt=fmt)
        side = [p for p in written if p.name.endswith(".density.json")][0]
        back = load_density(side)
        assert np.allclose(back.p_cross, jd.p_cross, atol=0)
        assert back.grid == jd.grid


def test_simulate_dump_density(tmp_path):
    out = tmp_path / "dd"
    assert run_cli("simulate", "--config", "ideal_hom", "--trials", 1000,
                   "--out", out, "--dump-density", "raw") == 0
    assert (out / "density.density.json").exists()
    assert (out / "density.p_cross.bin").exists()
