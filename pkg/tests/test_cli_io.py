import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradmap.cli import Scenario, main, parse_target, run_scenario
from gradmap.invariants import random_measure
from gradmap.measures import DiscreteMeasure
from gradmap.model_space import ModelSpace
from gradmap.reports import (
    InputError,
    RenormalizationWarning,
    dumps,
    load_measure,
    measure_from_obj,
    write_csv,
    write_measure,
)
from tests.conftest import ALL_MODELS


def _write(tmp_path, obj, name="m.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return p


def test_load_vertex_measure(tmp_path):
    p = _write(tmp_path, {"model": {"kind": "rp", "n": 1},
                          "atoms": [{"coords": [1, 0], "weight": 0.5}, {"coords": [0, 1], "weight": 0.5}]})
    nu = load_measure(p)
    np.testing.assert_array_equal(nu.atoms, np.eye(2))
    np.testing.assert_array_equal(nu.weights, [0.5, 0.5])


def test_renormalization_window(tmp_path):
    obj = {"model": {"kind": "rp", "n": 1},
           "atoms": [{"coords": [1, 0], "weight": 0.5}, {"coords": [0, 1], "weight": 0.499999999}]}
    with pytest.warns(RenormalizationWarning):
        nu = measure_from_obj(obj)
    assert nu.weights.sum() == pytest.approx(1.0, abs=1e-15)
    obj["atoms"][1]["weight"] = 0.4
    with pytest.raises(InputError, match="weight"):
        measure_from_obj(obj)


def test_complex_pairs(tmp_path):
    obj = {"model": {"kind": "cp", "n": 1},
           "atoms": [{"coords": [[1, 0], [0, 1]], "weight": 1.0}]}
    nu = measure_from_obj(obj)
    np.testing.assert_allclose(nu.atoms[0], np.array([1, 1j]) / np.sqrt(2))


@pytest.mark.parametrize("obj, where", [
    ({"model": {"kind": "xp", "n": 1}, "atoms": []}, "model"),
    ({"model": {"kind": "rp", "n": 1.5}, "atoms": []}, "model.n"),
    ({"model": {"kind": "rp", "n": 1}, "atoms": []}, "atoms"),
    ({"model": {"kind": "rp", "n": 1}, "atoms": [{"coords": [0, 0], "weight": 1}]}, "atoms[0].coords"),
    ({"model": {"kind": "rp", "n": 1}, "atoms": [{"coords": [1, 0, 0], "weight": 1}]}, "atoms[0].coords"),
    ({"model": {"kind": "rp", "n": 1}, "atoms": [{"coords": [1, "a"], "weight": 1}]}, "atoms[0].coords[1]"),
    ({"model": {"kind": "rp", "n": 1}, "atoms": [{"coords": [1, 0]}]}, "atoms[0].weight"),
    ({"model": {"kind": "rp", "n": 1}, "atoms": [{"coords": [1, 0], "weight": -1}]}, "atoms[0].weight"),
    ({"model": {"kind": "cp", "n": 1}, "atoms": [{"coords": [[1, 0, 2], 0], "weight": 1}]}, "coords[0]"),
    ({"model": {"kind": "rp", "n": 1},
      "atoms": [{"coords": [1, 0], "weight": 0.5}, {"coords": [-2, 0], "weight": 0.5}]}, "distinct"),
])
def test_schema_errors(obj, where):
    with pytest.raises(InputError, match=where.replace("[", r"\[").replace("]", r"\]")):
        measure_from_obj(obj)


def test_json_syntax_error_has_line(tmp_path):
    p = _write(tmp_path, '{"model": {"kind": "rp",\n "n": }}')
    with pytest.raises(InputError, match="line 2"):
        load_measure(p)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.sampled_from(range(5)), size=st.integers(1, 8))
def test_roundtrip_exact(tmp_path_factory, seed, m, size):
    model = ALL_MODELS[m]
    nu = random_measure(model, np.random.default_rng(seed), size)
    p = write_measure(nu, tmp_path_factory.mktemp("rt") / "nu.json")
    back = load_measure(p)
    assert back.model == nu.model
    np.testing.assert_array_equal(back.atoms, nu.atoms)
    np.testing.assert_array_equal(back.weights, nu.weights)


def test_dumps_format():
    text = dumps({"b": 0.1, "a": [1, 2.5], "c": np.array([[1 + 2j]])})
    assert text.index('"b"') < text.index('"a"')
    assert "0.10000000000000001" in text
    assert json.loads(text)["c"] == [[[1.0, 2.0]]]


def test_csv_comments(tmp_path):
    p = write_csv(tmp_path / "t.csv", ["x", "y"], [(1, 0.5), (2, 1 / 3)], ["first", "second"])
    lines = p.read_text().splitlines()
    assert lines[:3] == ["# first", "# second", "x,y"]
    assert lines[4] == "2,0.33333333333333331"


def test_parse_target():
    m = ModelSpace("rp", 2)
    np.testing.assert_array_equal(parse_target("[0.1, 0, -0.1]", m, False), [0.1, 0, -0.1])
    np.testing.assert_array_equal(parse_target("[0.1, 0, -0.1]", m, True), np.diag([0.1, 0, -0.1]))
    T = parse_target("[[0, 0.1, 0], [0.1, 0, 0], [0, 0, 0]]", m, True)
    assert T[0, 1] == 0.1
    with pytest.raises(InputError):
        parse_target("[1, 0, 0]", m, False)
    with pytest.raises(InputError):
        parse_target("[[0, 1, 0], [0, 0, 0], [0, 0, 0]]", m, True)
    with pytest.raises(InputError):
        parse_target("[1, 0", m, False)


@pytest.fixture
def files(tmp_path):
    rp2 = ModelSpace("rp", 2)
    write_measure(DiscreteMeasure.vertex_uniform(rp2), tmp_path / "vu.json")
    reg = DiscreteMeasure.from_points(rp2, [[1, 2, 3], [2, -1, 1], [1, 1, -2], [1, -3, -1], [0.5, 1, -1]])
    write_measure(reg, tmp_path / "reg.json")
    bad = DiscreteMeasure.from_points(rp2, [[1, 2, 3], [2, -1, 1], [1, 1, -2]], [0.3, 0.3, 0.4])
    write_measure(bad, tmp_path / "unstable.json")
    write_measure(DiscreteMeasure.from_points(ModelSpace("rp", 1), [[1, 0], [1, 1]]), tmp_path / "cex.json")
    return tmp_path


def test_cli_compute(files):
    out = files / "out"
    assert main(["compute", str(files / "vu.json"), "--output", str(out)]) == 0
    rep = json.loads((out / "compute.json").read_text())
    assert rep["schema_version"] == "1"
    assert np.max(np.abs(rep["outputs"]["gradient_F"])) < 1e-12
    assert "wall_time_s" not in rep


def test_cli_balance(files, capsys):
    out = files / "out"
    assert main(["balance", str(files / "reg.json"), "--output", str(out), "--format", "csv"]) == 0
    rep = json.loads((out / "balance.json").read_text())
    assert rep["outputs"]["status"] == "Converged" and rep["outputs"]["residual_norm"] < 1e-8
    assert (out / "balance.csv").read_text().startswith("# ")
    assert main(["balance", str(files / "unstable.json"), "--output", str(out)]) == 1
    assert "regularity" in capsys.readouterr().err


def test_cli_orbit_image(files):
    out = files / "out"
    code = main(["orbit-image", str(files / "reg.json"), "--samples", "37", "--format", "csv",
                 "--output", str(out), "--target", "[0.1, 0, -0.1]"])
    assert code == 0
    rows = [r for r in (out / "orbit-image.csv").read_text().splitlines() if not r.startswith("#")]
    assert len(rows) == 1 + 37
    assert main(["orbit-image", str(files / "cex.json"), "--target", "[0, 0]", "--output", str(out)]) == 1


def test_cli_polytope_and_reduce(files):
    out = files / "out"
    assert main(["polytope", "--model", "cp:2", "--output", str(out), "--format", "csv"]) == 0
    assert json.loads((out / "polytope.json").read_text())["outputs"]["volume"] == pytest.approx(np.sqrt(3) / 2)
    assert main(["reduce", str(files / "reg.json"), "--output", str(out)]) == 0
    assert main(["polytope", "--output", str(out)]) == 2
    assert main(["polytope", "--model", "rp-2", "--output", str(out)]) == 2


def test_cli_input_errors(files, capsys):
    p = files / "broken.json"
    p.write_text('{"model": {"kind": "rp", "n": 1}, "atoms": [{"coords": [1, 0, 0], "weight": 1}]}')
    assert main(["compute", str(p), "--output", str(files)]) == 2
    assert "atoms[0].coords" in capsys.readouterr().err
    assert main(["compute", str(files / "missing.json"), "--output", str(files)]) == 2
    assert main(["balance", str(files / "reg.json"), "--tol", "-1", "--output", str(files)]) == 2


def test_cli_env_output(files, monkeypatch):
    monkeypatch.setenv("GRADMAP_OUTPUT_DIR", str(files / "envout"))
    assert main(["compute", str(files / "vu.json")]) == 0
    assert (files / "envout" / "compute.json").exists()


def test_cli_determinism(files):
    a, b = files / "a", files / "b"
    for d in (a, b):
        assert main(["orbit-image", str(files / "reg.json"), "--seed", "7", "--format", "csv",
                     "--output", str(d)]) == 0
    assert (a / "orbit-image.json").read_bytes() == (b / "orbit-image.json").read_bytes()
    assert (a / "orbit-image.csv").read_bytes() == (b / "orbit-image.csv").read_bytes()


def test_cli_timing_flag(files):
    assert main(["compute", str(files / "vu.json"), "--timing", "--output", str(files / "t")]) == 0
    assert "wall_time_s" in json.loads((files / "t" / "compute.json").read_text())


def test_cli_check_quick(files, capsys):
    assert main(["check", "--scale", "0.05", "--output", str(files)]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 11


def test_run_scenario_direct(tmp_path):
    model = ModelSpace("rp", 2)
    s = Scenario("compute", model, DiscreteMeasure.vertex_uniform(model), {"seed": 0})
    res = run_scenario(s, tmp_path)
    assert res.exit_code == 0 and res.paths[0].name == "compute.json"
