import copy
import csv
import io
import json

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import fixture_path
from deco.cli import main, run_command, build_parser
from deco.errors import IoError, SchemaError, ValidationError
from deco.report import Report, emit_report, render_csv, render_json
from deco.scenario import GRID_DEFAULTS, parse_scenario
from deco.spectral import ThermalReservoirSpec

FIXTURES = ["fig1_optomech.json", "strong_hot.json", "weak_cold.json", "weak_hot.json",
            "strong_cold.json", "lutz.json", "lutz_equal.json", "white_noise.json",
            "single_mode.json", "thermal_qubit.json"]


def load(name):
    with open(fixture_path(name)) as f:
        return json.load(f)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


# --- parsing ---------------------------------------------------------------

@pytest.mark.parametrize("name", FIXTURES)
def test_fixtures_parse(name):
    sc = parse_scenario(fixture_path(name))
    assert sc.system.dim == 2


def test_optomech_fixture_has_two_environments():
    sc = parse_scenario(fixture_path("fig1_optomech.json"))
    assert len(sc.environments) == 2
    assert all(isinstance(e, ThermalReservoirSpec) for e in sc.environments)
    assert [e.channel for e in sc.environments] == [0, 0]
    assert sc.kernel().n_channels == 1


def test_defaults_are_applied():
    sc = parse_scenario(fixture_path("strong_hot.json"))
    assert sc.grids.n_omega == GRID_DEFAULTS["n_omega"]
    assert sc.omega_max() == 200.0  # 50 T with T = 4
    np.testing.assert_array_equal(sc.rho0, np.diag([1, 0]))


def test_negative_temperature_names_field():
    doc = load("strong_hot.json")
    doc["environments"][0]["temperature"] = -1
    with pytest.raises(ValidationError, match=r"environments\[0\]\.temperature"):
        parse_scenario(json.dumps(doc))


def test_non_hermitian_hamiltonian_names_field():
    doc = load("strong_hot.json")
    doc["system"]["hamiltonian"][0][1] = [1e-3, 0.0]
    with pytest.raises(ValidationError, match=r"system\.hamiltonian"):
        parse_scenario(json.dumps(doc))


def test_unknown_field_is_schema_error():
    doc = load("strong_hot.json")
    doc["grids"] = {"n_omegas": 3}
    with pytest.raises(SchemaError, match=r"grids\.n_omegas"):
        parse_scenario(json.dumps(doc))


def test_missing_field_is_schema_error():
    doc = load("strong_hot.json")
    del doc["environments"][0]["cutoff"]
    with pytest.raises(SchemaError, match=r"environments\[0\]\.cutoff"):
        parse_scenario(json.dumps(doc))


def test_unknown_environment_type():
    doc = load("strong_hot.json")
    doc["environments"][0]["type"] = "quantum_foam"
    with pytest.raises(SchemaError):
        parse_scenario(json.dumps(doc))


def test_environment_channel_must_exist():
    doc = load("strong_hot.json")
    doc["environments"][0]["channel"] = 1
    with pytest.raises(ValidationError, match=r"environments\[0\]\.channel"):
        parse_scenario(json.dumps(doc))


def test_rho0_is_checked():
    doc = load("white_noise.json")
    doc["rho0"] = [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]
    with pytest.raises(ValidationError, match="rho0"):
        parse_scenario(json.dumps(doc))


# --- reports ---------------------------------------------------------------

def test_float_format_round_trips():
    r = Report("x", "d", {"v": 0.1, "w": [1e-300, -2.5]}, "0", None, ["a"], [[0.1]])
    text = render_json(r)
    assert '"v": 0.10000000000000001' in text
    assert json.loads(text)["outputs"]["v"] == 0.1
    assert render_csv(r) == "a\n0.10000000000000001\n"


def test_emit_to_bad_path_raises(tmp_path):
    r = Report("x", "d", {}, "0", None, ["a"], [[1.0]])
    with pytest.raises(IoError):
        emit_report(r, "json", tmp_path / "missing" / "out.json")


# --- commands --------------------------------------------------------------

def test_compare_strong_hot_weak_cold(capsys):
    code, out, _ = run(capsys, "compare", "--scenario", fixture_path("strong_hot.json"),
                       "--scenario-b", fixture_path("weak_cold.json"))
    assert code == 0
    doc = json.loads(out)
    assert doc["outputs"]["verdict"] == "StrictlyGreater"
    assert list(doc) == ["command", "inputs_digest", "tool_version", "wall_time", "outputs"]
    assert doc["wall_time"] is None


def test_lutz_equal_temperatures(capsys):
    code, out, _ = run(capsys, "lutz", "--scenario", fixture_path("lutz_equal.json"))
    assert code == 0 and json.loads(out)["outputs"]["verdict"] == "Equivalent"


def test_evolve_magnus_white_noise(capsys):
    code, out, _ = run(capsys, "evolve", "--scenario", fixture_path("white_noise.json"),
                       "--method", "magnus", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    t = np.array([float(r["t"]) for r in rows])
    rho01 = np.array([float(r["rho_re_01"]) for r in rows])
    np.testing.assert_allclose(rho01, 0.5 * np.exp(-2 * 0.5 * t), rtol=1e-3)


def test_evolve_rho0_and_dt_flags(capsys, tmp_path):
    rho = tmp_path / "rho.json"
    rho.write_text(json.dumps([[[1, 0], [0, 0]], [[0, 0], [0, 0]]]))
    code, out, _ = run(capsys, "evolve", "--scenario", fixture_path("white_noise.json"),
                       "--method", "master", "--rho0", str(rho), "--dt", "0.05")
    assert code == 0
    rows = json.loads(out)["outputs"]["rows"]
    assert rows[-1][1] == pytest.approx(1.0)


def test_evolve_exact_single_mode(capsys):
    code, out, _ = run(capsys, "evolve", "--scenario", fixture_path("single_mode.json"),
                       "--method", "exact")
    assert code == 0 and len(json.loads(out)["outputs"]["rows"]) == 11


def test_fdr_check_fixture(capsys):
    code, out, _ = run(capsys, "fdr-check", "--scenario", fixture_path("fig1_optomech.json"))
    assert code == 0
    res = json.loads(out)["outputs"]
    assert res["residual"] > 0.05 and res["obeys_fdr"] is False


def test_dissipator_command(capsys):
    code, out, _ = run(capsys, "dissipator", "--scenario", fixture_path("thermal_qubit.json"),
                       "--format", "csv")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "I,J,re,im" and len(lines) == 17


def test_kernels_json_and_csv_agree(capsys):
    _, js, _ = run(capsys, "kernels", "--scenario", fixture_path("fig1_optomech.json"))
    _, cs, _ = run(capsys, "kernels", "--scenario", fixture_path("fig1_optomech.json"), "--format", "csv")
    doc = json.loads(js)["outputs"]
    rows = list(csv.reader(io.StringIO(cs)))
    assert rows[0] == doc["columns"] == ["omega", "alpha_re_00", "alpha_im_00"]
    assert [[float(x) for x in r] for r in rows[1:]] == doc["rows"]


@pytest.mark.parametrize("argv", [
    ["kernels", "--scenario", "fig1_optomech.json"],
    ["compare", "--scenario", "weak_hot.json", "--scenario-b", "strong_cold.json"],
    ["lutz", "--scenario", "lutz.json"],
    ["fdr-check", "--scenario", "fig1_optomech.json"],
    ["dissipator", "--scenario", "thermal_qubit.json"],
    ["evolve", "--scenario", "white_noise.json", "--method", "master"],
    ["evolve", "--scenario", "single_mode.json", "--method", "exact"],
])
@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_reports_are_byte_identical(tmp_path, argv, fmt):
    argv = [fixture_path(a) if a.endswith(".json") else a for a in argv]
    outs = []
    for i in range(2):
        path = tmp_path / f"r{i}.{fmt}"
        assert main(argv + ["--format", fmt, "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_timing_flag_records_wall_time(capsys):
    code, out, _ = run(capsys, "lutz", "--scenario", fixture_path("lutz.json"), "--timing")
    assert code == 0 and json.loads(out)["wall_time"] >= 0


# --- exit codes ------------------------------------------------------------

def test_exit_codes(capsys, tmp_path):
    good = fixture_path("strong_hot.json")
    assert run(capsys, "kernels", "--scenario", str(tmp_path / "nope.json"))[0] == 1
    assert run(capsys, "kernels", "--scenario", good, "--out", str(tmp_path / "no" / "x"))[0] == 1
    assert run(capsys, "frobnicate", "--scenario", good)[0] == 2
    assert run(capsys, "compare", "--scenario", good)[0] == 2
    assert run(capsys, "lutz", "--scenario", good)[0] == 2
    assert run(capsys, "evolve", "--scenario", good, "--method", "exact")[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(capsys, "kernels", "--scenario", str(bad))
    assert code == 2 and "SchemaError" in err


def test_numerical_failure_exit_code(capsys, tmp_path):
    doc = load("thermal_qubit.json")
    doc["system"]["hamiltonian"] = [[[20, 0], [0, 0]], [[0, 0], [-20, 0]]]
    doc["grids"]["dt"] = 0.1
    path = tmp_path / "stiff.json"
    path.write_text(json.dumps(doc))
    code, _, err = run(capsys, "evolve", "--scenario", str(path), "--method", "master")
    assert code == 3 and "StepSizeTooLarge" in err


def _mutations():
    leaf = st.one_of(st.none(), st.booleans(), st.integers(-5, 5), st.floats(allow_nan=True),
                     st.text(max_size=3), st.lists(st.integers(), max_size=2))
    paths = st.sampled_from([
        ("system", "dim"), ("system", "hamiltonian"), ("system", "couplings"),
        ("environments",), ("environments", 0, "temperature"), ("environments", 0, "type"),
        ("environments", 0, "cutoff"), ("grids",), ("grids", "n_omega"), ("extra",),
        ("system", "couplings", 0, "channel"), ("environments", 0, "family"),
    ])
    return st.tuples(paths, leaf, st.booleans())


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.lists(_mutations(), min_size=1, max_size=3))
def test_malformed_scenarios_exit_cleanly(tmp_path, capsys, muts):
    doc = copy.deepcopy(load("lutz.json"))
    doc["grids"] = {"n_omega": 101}
    for path, value, delete in muts:
        node = doc
        try:
            for key in path[:-1]:
                node = node[key]
            if delete and isinstance(node, dict):
                node.pop(path[-1], None)
            else:
                node[path[-1]] = value
        except (KeyError, IndexError, TypeError):
            continue
    p = tmp_path / "m.json"
    p.write_text(json.dumps(doc))
    for cmd in ("kernels", "lutz"):
        code, _, err = run(capsys, cmd, "--scenario", str(p))
        assert code in (0, 2, 3)
        if code:
            assert err.startswith("deco: ")
