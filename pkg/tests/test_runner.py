import copy
import csv
import json

import pytest

import pencilab.errors
import pencilab.runner
import pencilab.scenario

EUCLIDEAN = {
    "schema": "pencilab/scenario/1",
    "name": "euclidean",
    "dimension": 2,
    "pencil": {"f": [{"family": "constant", "c": 1}, {"family": "constant", "c": 2}]},
    "source": {"kind": "explicit-frame", "frame": "euclidean"},
    "grid": {"lower": [0.2, 0.2], "upper": [1.0, 1.0], "resolution": 3},
    "lax": {"lambdas": [0.5, 2.0], "steps": 8},
}

SPHERE = {
    "schema": "pencilab/scenario/1",
    "name": "sphere",
    "dimension": 2,
    "pencil": {"f": [{"family": "constant", "c": 1}, {"family": "constant", "c": 1}], "K1": 1, "K2": 1},
    "source": {"kind": "explicit-frame", "frame": "sphere"},
    "grid": {"lower": [0.5, 0.1], "upper": [1.2, 0.8], "resolution": 3},
    "lax": {"lambdas": [1.0], "steps": 16},
    "tolerances": {"default": 1e-6, "lax": 1e-8},
}


def scenario(data, **changes):
    data = copy.deepcopy(data)
    data.update(changes)
    return pencilab.scenario.Scenario.from_dict(data)


@pytest.fixture
def euclidean_report():
    return pencilab.runner.run(scenario(EUCLIDEAN))


def test_run_euclidean(euclidean_report):
    report = euclidean_report
    assert report.passed, report.failures()
    assert report.verdict == "pass"
    assert report.pencil == "nonsingular"
    assert list(report.sections) == ["metric", "lame", "lax"]
    assert any(name.startswith("constant-f ") for name in report.sections["lame"].equations)
    assert [row["lambda"] for row in report.monodromy] == [[0.5, 0.0], [2.0, 0.0]]
    assert len(report.beta_field) == 9
    assert report.h_field[0] == {"point": [0.2, 0.2], "H": [[1.0, 0.0], [1.0, 0.0]]}
    assert report.timings is None


def test_run_sphere_singular_pencil():
    report = pencilab.runner.run(scenario(SPHERE))
    assert report.pencil == "singular"
    assert report.sections["lax"].passed
    assert any("constant-eigenvalue system skipped" in note for note in report.sections["lame"].notes)


def test_run_perturbed_fails(caplog):
    data = copy.deepcopy(SPHERE)
    data["source"] = {"kind": "explicit-frame", "frame": "sphere", "perturb": {"pair": [1, 2], "delta": 0.01}}
    data["lax"] = {"enabled": False}
    report = pencilab.runner.run(pencilab.scenario.Scenario.from_dict(data))
    assert not report.passed
    assert report.verdict == "fail"
    assert any(failure.startswith("lame: ") for failure in report.failures())
    assert "lax" not in report.sections
    assert report.monodromy == []
    assert "residual failures" in caplog.text


def test_tolerance_override():
    report = pencilab.runner.run(scenario(SPHERE, lax={"enabled": False}), tolerance=1e-30)
    assert report.tolerance == 1e-30
    assert not report.passed


@pytest.mark.parametrize(
    ("source",),
    [
        pytest.param(
            {"kind": "special-solution", "family": "mean-value", "psi": {"family": "exp", "rate": 0.5}, "second": [0.2, 1.0]},
            id="mean_value",
        ),
        pytest.param(
            {"kind": "special-solution", "family": "separated", "a": -1.0, "second": [0.2, 1.5]},
            id="separated_regular",
        ),
        pytest.param(
            {"kind": "special-solution", "family": "separated", "a": 2.0, "branch": "modified", "second": [0.2, 1.5]},
            id="separated_modified",
        ),
        pytest.param(
            {"kind": "special-solution", "family": "f2-general", "g": "identity", "h": {"family": "sin"}, "first": [1, 2], "second": [1, 2]},
            id="f2_general",
        ),
        pytest.param(
            {"kind": "special-solution", "family": "f3-general", "g": {"family": "cos"}, "h": "identity"},
            id="f3_general",
        ),
    ],
)
def test_run_special(source):
    report = pencilab.runner.run(scenario(EUCLIDEAN, source=source))
    assert list(report.sections) == ["special"]
    assert report.passed, report.failures()
    assert report.pencil == "n/a"
    assert "pencil pair reduces to type f3" in report.sections["special"].notes


def test_run_is_deterministic():
    first = pencilab.runner.run(scenario(EUCLIDEAN), seed=11)
    second = pencilab.runner.run(scenario(EUCLIDEAN), seed=11)
    assert first == second
    assert first.seed == 11


def test_timings():
    report = pencilab.runner.run(scenario(EUCLIDEAN), timings=True)
    assert set(report.timings) == {"metric", "lame", "lax"}
    assert "timings" in report.as_json()


def test_report_round_trip(tmpdir, euclidean_report):
    path = pencilab.runner.write_report(euclidean_report, str(tmpdir.join("out")), "r.json")
    assert path == str(tmpdir.join("out", "r.json"))
    loaded = pencilab.runner.load_report(path)
    assert loaded == euclidean_report
    assert loaded.passed
    assert json.loads(tmpdir.join("out", "r.json").read())["schema"] == pencilab.runner.REPORT_SCHEMA


@pytest.mark.parametrize(
    ("text", "message"),
    [
        pytest.param("{\n  nope", "Expecting property name", id="bad_json"),
        pytest.param('{"schema": "other"}', "not a pencilab report", id="wrong_schema"),
        pytest.param('{"sections": {"lame": {"equations": [{}]}}}', "malformed report", id="malformed"),
    ],
)
def test_load_report_errors(tmpdir, text, message):
    path = tmpdir.join("report.json")
    path.write(text)
    with pytest.raises(pencilab.errors.ScenarioError, match=message) as excinfo:
        pencilab.runner.load_report(str(path))
    assert excinfo.value.path == str(path)


def read_csv(path):
    with open(path) as inf:
        lines = inf.read().splitlines()
    docs = [line for line in lines if line.startswith("#")]
    rows = list(csv.reader(line for line in lines if not line.startswith("#")))
    return docs, rows[0], rows[1:]


@pytest.mark.parametrize(
    ("what", "columns", "count"),
    [
        pytest.param(
            "beta-field", ["u1", "u2", "re_beta12", "im_beta12", "re_beta21", "im_beta21"], 9, id="beta_field"
        ),
        pytest.param("H-field", ["u1", "u2", "re_H1", "im_H1", "re_H2", "im_H2"], 9, id="h_field"),
        pytest.param(
            "monodromy-vs-lambda",
            ["re_lambda", "im_lambda", "shifted", "defect", "zero_curvature"],
            2,
            id="monodromy",
        ),
    ],
)
def test_export(tmpdir, euclidean_report, what, columns, count):
    out = pencilab.runner.export_plot_data(euclidean_report, what, str(tmpdir.join("plots", f"{what}.csv")))
    docs, header, rows = read_csv(out)
    assert header == columns
    assert len(rows) == count
    assert all(len(row) == len(columns) for row in rows)
    assert docs


def test_export_residual_map(tmpdir, euclidean_report):
    out = pencilab.runner.export_plot_data(euclidean_report, "residual-map", str(tmpdir.join("map.csv")))
    _, header, rows = read_csv(out)
    assert header == ["section", "equation", "u1", "u2", "residual"]
    assert rows
    assert {row[0] for row in rows} <= {"metric", "lame"}
    assert all(float(row[-1]) <= 1e-6 for row in rows)


def test_export_errors(tmpdir):
    report = pencilab.runner.run(scenario(EUCLIDEAN, lax={"enabled": False}))
    with pytest.raises(pencilab.errors.MissingSectionError, match="monodromy-vs-lambda"):
        pencilab.runner.export_plot_data(report, "monodromy-vs-lambda", str(tmpdir.join("m.csv")))
    with pytest.raises(pencilab.errors.InvalidConstantsError, match="unknown export kind"):
        pencilab.runner.export_plot_data(report, "heatmap", str(tmpdir.join("m.csv")))
