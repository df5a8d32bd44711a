"""Command-line interface: config validation, reports, exit codes.

Every invocation goes through ``main`` in-process; reports land in a tmp
directory and are parsed back as JSON or CSV.
"""

from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gibbslab.cli import (
    EXIT_CHECK_FAILURE,
    EXIT_EXPECTED_FAILURES,
    EXIT_OK,
    EXIT_USAGE,
    SCHEMA_VERSION,
    decode_matrix,
    format_float,
    main,
    normalised_config,
)
from gibbslab.errors import ValidationError
from gibbslab.generators import localised_generator
from gibbslab.weights import balanced_gamma
from gibbslab.models import model_from_config


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def qubit_config(**overrides):
    config = {
        "schema_version": SCHEMA_VERSION,
        "model": {"name": "qubit"},
        "weight": {"kind": "balanced", "phi_name": "gaussian", "sigma": 1.0},
    }
    config.update(overrides)
    return config


# ---------------------------------------------------------------------------
# Config normalisation
# ---------------------------------------------------------------------------


def test_normalised_config_is_idempotent():
    once = normalised_config(qubit_config(), "verify-stationarity")
    twice = normalised_config(once, "verify-stationarity")
    assert once == twice
    assert once["generator"]["kind"] == "localised"
    assert once["run"]["seeds"] == [2024]


def test_normalised_config_rejections():
    bad_cases = [
        qubit_config(schema_version=2),
        qubit_config(unknown_section=1),
        {"schema_version": 1, "model": {"name": "qubit"}, "weight": {"kind": "balanced", "phi_name": "gaussian", "sigma": -1.0}},
        {"schema_version": 1, "model": {"name": "qubit"}, "weight": {"kind": "glauber", "sigma": 1.0}},
        {"schema_version": 1, "model": {"name": "qubit"}, "weight": {"kind": "metropolis", "phi_name": "gaussian"}},
        qubit_config(run={"times": [1.0, 0.5]}),
        qubit_config(run={"sigma_sweep": [0.5, 1.0]}),
        qubit_config(run={"tolerances": {"stationarity": 0.0}}),
        qubit_config(run={"tolerances": {"mystery": 1.0}}),
        qubit_config(run={"seeds": []}),
        qubit_config(output={"format": "xml"}),
    ]
    for payload in bad_cases:
        with pytest.raises(ValidationError):
            normalised_config(payload, "verify-stationarity")


def test_balance_broken_flag_controls_weight_construction():
    config = qubit_config()
    config["weight"]["balance_broken"] = True
    normalised = normalised_config(config, "verify-stationarity")
    assert normalised["weight"]["balance_broken"] is True
    with pytest.raises(ValidationError):
        bad = qubit_config(weight={"kind": "glauber", "balance_broken": True})
        normalised_config(bad, "verify-stationarity")


# ---------------------------------------------------------------------------
# Exit codes
# ---------------------------------------------------------------------------


def test_verify_passes_on_the_qubit(tmp_path, capsys):
    config = write_config(tmp_path, qubit_config())
    report_path = tmp_path / "report.json"
    code = main(["verify-stationarity", "--config", config, "--report", str(report_path)])
    assert code == EXIT_OK
    report = json.loads(report_path.read_text())
    assert report["overall_pass"] is True
    names = {check["name"] for check in report["checks"]}
    assert {"stationarity_residual", "trace_functional", "dual_path"} <= names
    assert report["config"]["generator"]["kind"] == "localised"
    assert report["environment"]["package_version"]


def test_verify_check_filter_and_failure_exit(tmp_path):
    config_payload = qubit_config(run={"tolerances": {"dual_path": 1e-30}})
    config = write_config(tmp_path, config_payload)
    report_path = tmp_path / "r.json"
    code = main(["verify-stationarity", "--config", config, "--check", "dual_path", "--report", str(report_path)])
    assert code == EXIT_CHECK_FAILURE
    report = json.loads(report_path.read_text())
    assert [check["name"] for check in report["checks"]] == ["dual_path"]
    assert report["overall_pass"] is False


def test_verify_negative_control_flips_the_meaning(tmp_path):
    config = write_config(tmp_path, qubit_config())
    report_path = tmp_path / "r.json"
    code = main([
        "verify-stationarity", "--config", config, "--negative-control",
        "--report", str(report_path),
    ])
    assert code == EXIT_OK
    report = json.loads(report_path.read_text())
    control = {c["name"]: c for c in report["checks"]}["negative_control_residual"]
    assert control["mode"] == "lower"
    assert control["value"] > 1e-4
    assert control["pass"] is True


def test_usage_errors_exit_two(tmp_path, capsys):
    bad_config = write_config(tmp_path, qubit_config(schema_version=2))
    assert main(["verify-stationarity", "--config", bad_config]) == EXIT_USAGE
    capsys.readouterr()
    good = write_config(tmp_path, qubit_config())
    assert main(["verify-stationarity", "--config", good, "--check", "nonsense"]) == EXIT_USAGE
    err = capsys.readouterr().err
    assert err.startswith("error:")
    missing = str(tmp_path / "missing.json")
    assert main(["verify-stationarity", "--config", missing]) == EXIT_USAGE


# ---------------------------------------------------------------------------
# Bandwidth sweep
# ---------------------------------------------------------------------------


def test_sweep_produces_monotone_columns(tmp_path):
    payload = qubit_config(run={"sigma_sweep": [1.0, 0.5, 0.25]})
    config = write_config(tmp_path, payload)
    out_path = tmp_path / "sweep.csv"
    report_path = tmp_path / "sweep_report.json"
    code = main([
        "sweep-sigma", "--config", config,
        "--out", str(out_path), "--report", str(report_path),
    ])
    assert code == EXIT_OK
    text = out_path.read_text()
    assert "\r" not in text
    lines = text.splitlines()
    metadata = [line for line in lines if line.startswith("#")]
    assert any("gibbslab_version" in line for line in metadata)
    assert any("flag_davies_distance_p1_nonincreasing=true" in line for line in metadata)
    header_index = next(i for i, line in enumerate(lines) if not line.startswith("#"))
    header = lines[header_index].split(",")
    assert header[0] == "sigma"
    assert {"davies_distance_p1", "coherent_norm_B", "b1_l1", "stationarity_residual"} <= set(header)
    rows = [line.split(",") for line in lines[header_index + 1:] if line]
    assert len(rows) == 3
    distances = [float(row[header.index("davies_distance_p1")]) for row in rows]
    assert distances[0] > distances[1] > distances[2]
    b1_column = [float(row[header.index("b1_l1")]) for row in rows]
    assert b1_column[0] < b1_column[1] < b1_column[2]
    assert b1_column[-1] < math.sqrt(math.pi) / 32.0


def test_sweep_is_byte_deterministic(tmp_path):
    payload = qubit_config(run={"sigma_sweep": [1.0, 0.5]})
    config = write_config(tmp_path, payload)
    first = tmp_path / "a.csv"
    second = tmp_path / "b.csv"
    assert main(["sweep-sigma", "--config", config, "--out", str(first)]) == EXIT_OK
    assert main(["sweep-sigma", "--config", config, "--out", str(second)]) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()


def test_sweep_single_sigma_emits_no_flags(tmp_path):
    payload = qubit_config(run={"sigma_sweep": [0.5]})
    config = write_config(tmp_path, payload)
    out_path = tmp_path / "one.csv"
    assert main(["sweep-sigma", "--config", config, "--out", str(out_path)]) == EXIT_OK
    assert "flag_" not in out_path.read_text()


def test_sweep_requires_localised_balanced(tmp_path):
    payload = {
        "schema_version": 1,
        "model": {"name": "qubit"},
        "weight": {"kind": "glauber"},
    }
    config = write_config(tmp_path, payload)
    assert main(["sweep-sigma", "--config", config]) == EXIT_USAGE


def test_sweep_json_format(tmp_path):
    payload = qubit_config(
        run={"sigma_sweep": [1.0, 0.5]}, output={"format": "json"}
    )
    config = write_config(tmp_path, payload)
    out_path = tmp_path / "sweep.json"
    assert main(["sweep-sigma", "--config", config, "--out", str(out_path)]) == EXIT_OK
    data = json.loads(out_path.read_text())
    assert set(data) == {"metadata", "columns", "rows"}
    assert len(data["rows"]) == 2


# ---------------------------------------------------------------------------
# Evolution runs
# ---------------------------------------------------------------------------


def test_evolve_excited_qubit_reaches_gibbs(tmp_path):
    payload = qubit_config(
        run={"times": [0.0, 1.0, 5.0, 20.0], "initial_state": "excited"}
    )
    config = write_config(tmp_path, payload)
    out_path = tmp_path / "trajectory.csv"
    report_path = tmp_path / "report.json"
    code = main([
        "evolve", "--config", config,
        "--out", str(out_path), "--report", str(report_path),
    ])
    assert code == EXIT_OK
    report = json.loads(report_path.read_text())
    checks = {c["name"]: c for c in report["checks"]}
    assert checks["final_gibbs_distance"]["value"] < 1e-6
    assert checks["trace_deviation_max"]["pass"]
    assert checks["min_eigenvalue_worst"]["pass"]
    assert checks["choi_min_eigenvalue"]["pass"]
    lines = [l for l in out_path.read_text().splitlines() if l and not l.startswith("#")]
    header = lines[0].split(",")
    assert header == ["t", "trace", "min_eig", "gibbs_distance"]
    assert len(lines) - 1 == 4


def test_evolve_time_zero_only(tmp_path):
    payload = qubit_config(run={"times": [0.0], "initial_state": "gibbs"})
    config = write_config(tmp_path, payload)
    out_path = tmp_path / "t0.csv"
    code = main(["evolve", "--config", config, "--out", str(out_path)])
    assert code == EXIT_OK
    rows = [l for l in out_path.read_text().splitlines() if l and not l.startswith("#")]
    assert len(rows) - 1 == 1


def test_evolve_unconverged_run_fails_the_distance_check(tmp_path):
    payload = qubit_config(run={"times": [0.0], "initial_state": "maximally_mixed"})
    config = write_config(tmp_path, payload)
    report_path = tmp_path / "r.json"
    code = main(["evolve", "--config", config, "--report", str(report_path)])
    assert code == EXIT_CHECK_FAILURE
    report = json.loads(report_path.read_text())
    checks = {c["name"]: c for c in report["checks"]}
    assert not checks["final_gibbs_distance"]["pass"]
    assert checks["trace_deviation_max"]["pass"]


def test_evolve_seeded_random_state_is_deterministic(tmp_path, capsys):
    payload = qubit_config(run={"times": [0.0, 20.0], "initial_state": "random", "seeds": [7]})
    config = write_config(tmp_path, payload)
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert main(["evolve", "--config", config, "--out", str(a)]) == EXIT_OK
    assert main(["evolve", "--config", config, "--out", str(b)]) == EXIT_OK
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()


# ---------------------------------------------------------------------------
# Bundle export
# ---------------------------------------------------------------------------


def test_bundle_export_round_trips(tmp_path):
    config_payload = qubit_config()
    config = write_config(tmp_path, config_payload)
    bundle_path = tmp_path / "bundle.json"
    code = main([
        "verify-stationarity", "--config", config,
        "--export-bundle", str(bundle_path),
        "--report", str(tmp_path / "r.json"),
    ])
    assert code == EXIT_OK
    payload = json.loads(bundle_path.read_text())
    assert payload["kind"] == "localised"
    assert payload["dim"] == 2
    model = model_from_config(config_payload["model"])
    weight = balanced_gamma("gaussian", 1.0)
    bundle = localised_generator(model, weight, 1.0)
    for key, reference in (
        ("hamiltonian", model.hamiltonian),
        ("coherent_matrix", bundle.coherent_matrix),
        ("superoperator", bundle.superoperator),
    ):
        decoded = decode_matrix(payload["matrices"][key])
        assert np.allclose(decoded, reference, atol=1e-12)


# ---------------------------------------------------------------------------
# Selftest battery
# ---------------------------------------------------------------------------


def test_selftest_passes(tmp_path):
    report_path = tmp_path / "selftest.json"
    code = main(["selftest", "--report", str(report_path)])
    assert code == EXIT_OK
    report = json.loads(report_path.read_text())
    assert report["overall_pass"] is True
    assert len(report["checks"]) >= 12
    names = {c["name"] for c in report["checks"]}
    assert "fault_injection_detected" in names
    assert "negative_control_residual" in names


def test_selftest_tighten_reports_expected_failures(tmp_path):
    report_path = tmp_path / "tight.json"
    code = main(["selftest", "--tighten", "1e3", "--report", str(report_path)])
    report = json.loads(report_path.read_text())
    failures = [c for c in report["checks"] if not c["pass"]]
    if failures:
        assert code == EXIT_EXPECTED_FAILURES
        assert all(c.get("pass_at_standard") for c in failures)
        assert report["expected_failures"] == [c["name"] for c in failures]
    else:
        assert code == EXIT_OK
    assert main(["selftest", "--tighten", "0.5"]) == EXIT_USAGE


# ---------------------------------------------------------------------------
# Formatting helpers
# ---------------------------------------------------------------------------


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_float_round_trips(x):
    assert float(format_float(x)) == x


def test_reports_are_stable_json(tmp_path):
    config = write_config(tmp_path, qubit_config())
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    assert main(["verify-stationarity", "--config", config, "--report", str(a)]) == EXIT_OK
    assert main(["verify-stationarity", "--config", config, "--report", str(b)]) == EXIT_OK
    report_a = json.loads(a.read_text())
    report_b = json.loads(b.read_text())
    report_a["timing"] = report_b["timing"] = None
    assert report_a == report_b
