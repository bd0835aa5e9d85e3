import csv
import io
import json
import math
import shutil
import subprocess

import pytest

from point_scatterer.cli import (
    CONFIG_KEYS,
    EXIT_DATA,
    EXIT_OK,
    EXIT_USAGE,
    SCHEMA_VERSION,
    RunConfig,
    main,
    parse_config,
)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    return code, json.loads(out), err


@pytest.fixture
def cache(tmp_path):
    return str(tmp_path / "cache")


# ---------------------------------------------------------------- configuration


def test_defaults():
    cmd, cfg, _ = parse_config(["orbits"])
    assert cmd == "orbits"
    assert cfg.z0 == (0.0, 2.0) and cfg.alpha == 1.0 and cfg.radius == 10.0
    assert cfg.kmax == 6 and cfg.width == 1.0 and cfg.sigma is None
    assert cfg.format == "json" and cfg.tolerance == 1e-8 and cfg.seed == 0


def test_alpha_infinity():
    _, cfg, _ = parse_config(["orbits", "--alpha", "inf"])
    assert math.isinf(cfg.alpha) and cfg.alpha > 0
    assert cfg.to_dict()["alpha"] == "inf"


@pytest.mark.parametrize("bad", ["0", "nan", "abc"])
def test_bad_alpha_is_usage_error(capsys, bad):
    code, _, err = run(capsys, "orbits", "--alpha", bad)
    assert code == EXIT_USAGE and "alpha" in err


def test_flags_override_config_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"radius": 5, "alpha": "inf", "seed": 3}))
    _, cfg, _ = parse_config(["orbits", "--config", str(path), "--radius", "4"])
    assert cfg.radius == 4.0 and math.isinf(cfg.alpha) and cfg.seed == 3


def test_unknown_config_key(capsys, tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"radius": 5, "colour": "red"}))
    code, _, err = run(capsys, "orbits", "--config", str(path))
    assert code == EXIT_USAGE and "colour" in err


def test_config_keys_cover_run_config():
    assert CONFIG_KEYS == set(RunConfig().to_dict())


@pytest.mark.parametrize("argv", [["orbits", "--z0", "0", "-1"], ["orbits", "--radius", "-2"], ["geometric-check", "--sigma", "0.3"], ["orbits", "--kmax", "0"]])
def test_invalid_values(capsys, argv):
    assert run(capsys, *argv)[0] == EXIT_USAGE


def test_unknown_subcommand(capsys):
    assert run(capsys, "frobnicate")[0] == EXIT_USAGE


# ---------------------------------------------------------------- orbits


def test_orbits_reduces_base_point(capsys, cache):
    code, doc, _ = run_json(capsys, "orbits", "--z0", "0.5", "0.1", "--radius", "4", "--cache-dir", cache)
    assert code == EXIT_OK
    res = doc["result"]
    assert res["z0_input"] == [0.5, 0.1]
    x, y = res["z0_reduced"]
    assert abs(x) <= 0.5 and x * x + y * y >= 1 - 1e-12
    a, b, c, d = res["reduction"]
    assert a * d - b * c == 1
    assert res["count"] == len(doc["rows"])


def test_orbit_cache_is_byte_identical(capsys, cache, tmp_path):
    out1, out2 = tmp_path / "1.json", tmp_path / "2.json"
    run(capsys, "orbits", "--radius", "6", "--cache-dir", cache, "-o", str(out1))
    code, _, err = run(capsys, "orbits", "--radius", "6", "--cache-dir", cache, "-o", str(out2))
    assert code == EXIT_OK and "cache" in err
    assert out1.read_bytes() == out2.read_bytes()


def test_orbits_csv(capsys, cache):
    code, out, _ = run(capsys, "orbits", "--radius", "3", "--cache-dir", cache, "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == EXIT_OK
    assert rows[0] == ["schema_version", "a", "b", "c", "d", "length"]
    assert all(r[0] == str(SCHEMA_VERSION) for r in rows[1:])
    assert all(float(r[5]) <= 3.0 for r in rows[1:])


# ---------------------------------------------------------------- other commands


def test_json_envelope(capsys, cache):
    code, doc, _ = run_json(capsys, "spectral", "--radius", "6", "--cache-dir", cache, "--real-range", "1.5", "2.5", "3")
    assert code == EXIT_OK
    assert doc["schema_version"] == SCHEMA_VERSION and doc["command"] == "spectral"
    assert doc["config"]["radius"] == 6.0
    assert [r["s_re"] for r in doc["rows"]] == [1.5, 2.0, 2.5]
    assert all(r["error_is_estimate"] for r in doc["rows"])


def test_eisenstein_functional_equation(capsys):
    code, doc, _ = run_json(capsys, "eisenstein")
    assert code == EXIT_OK
    assert doc["result"]["max_fe_residual"] < 1e-8


def test_eigenvalues_command(capsys, cache):
    code, doc, _ = run_json(capsys, "eigenvalues", "--cache-dir", cache)
    assert code == EXIT_OK
    (row,) = doc["rows"]
    assert row["v"] == pytest.approx(1.1036, abs=1e-4)


def test_synthetic_check_deterministic(capsys):
    code1, out1, _ = run(capsys, "synthetic-check", "--count", "10", "--seed", "5")
    code2, out2, _ = run(capsys, "synthetic-check", "--count", "10", "--seed", "5")
    assert code1 == code2 == EXIT_OK and out1 == out2
    doc = json.loads(out1)["result"]
    assert doc["max_residual"] < 1e-8 and doc["windings_consistent"]


def test_synthetic_check_fails_with_impossible_tolerance(capsys):
    code, _, err = run(capsys, "synthetic-check", "--count", "3", "--tolerance", "1e-300")
    assert code == 1 and "check failed" in err


def test_trace_report_without_dataset(capsys, cache):
    code, doc, _ = run_json(capsys, "trace-report", "--maass-data", "none", "--cache-dir", cache)
    assert code == EXIT_OK
    assert doc["result"]["lhs"] == "unavailable"
    assert doc["result"]["rhs"] == "unavailable"


def test_trace_report_bad_dataset(capsys, cache, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(capsys, "trace-report", "--maass-data", str(bad), "--cache-dir", cache)
    assert code == EXIT_DATA and "data error" in err


def test_trace_report_csv_flattens(capsys, cache):
    code, out, _ = run(capsys, "trace-report", "--cache-dir", cache, "--format", "csv")
    assert code == EXIT_OK
    rows = {r[1]: r[2] for r in csv.reader(io.StringIO(out)) if len(r) == 3}
    assert rows["within_budget"] == "True"
    assert "truncation.sigma" in rows and "errors.scattering" in rows


@pytest.mark.skipif(shutil.which("point-scatterer") is None, reason="console script not installed")
def test_console_script():
    out = subprocess.run(["point-scatterer", "--version"], capture_output=True, text=True, check=True)
    assert out.stdout.strip()


def test_negative_infinite_alpha():
    _, cfg, _ = parse_config(["orbits", "--alpha=-inf"])
    assert cfg.alpha == -math.inf and cfg.to_dict()["alpha"] == "-inf"
