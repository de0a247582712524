import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mepstab.config import ExperimentConfig, apply_overrides, load_config
from mepstab.errors import ConfigurationError, InputError
from mepstab.geometry import DiscretePath
from mepstab.io import (
    SCHEMA_VERSION,
    atomic_write,
    format_float,
    line_plot_svg,
    read_json,
    read_path_csv,
    write_json,
    write_path_csv,
    write_table_csv,
)


@settings(max_examples=200)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_format_round_trips(x):
    assert float(format_float(x)) == x


def test_path_csv_round_trip(tmp_path):
    a = np.linspace(0, 1, 17)
    p = DiscretePath(a, np.column_stack([np.cos(a), np.sin(a) / 3, a**2]))
    write_path_csv(p, tmp_path / "p.csv")
    q = read_path_csv(tmp_path / "p.csv")
    np.testing.assert_array_equal(q.alphas, p.alphas)
    np.testing.assert_array_equal(q.nodes, p.nodes)
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "alpha,x1,x2,x3"


@pytest.mark.parametrize("text", ["", "a,b\n0,1\n", "alpha,x1\n0,1\n0.5\n1,2\n", "alpha,x1\n0,zz\n"])
def test_bad_path_files(tmp_path, text):
    f = tmp_path / "bad.csv"
    f.write_text(text)
    with pytest.raises(InputError):
        read_path_csv(f)


def test_json_has_schema_and_nulls(tmp_path):
    write_json({"x": float("nan"), "y": np.array([1.0, np.inf]), "ok": np.bool_(True), "k": np.int64(3)},
               tmp_path / "r.json")
    doc = read_json(tmp_path / "r.json")
    assert doc == {"schema_version": SCHEMA_VERSION, "x": None, "y": [1.0, None], "ok": True, "k": 3}


def test_table_csv(tmp_path):
    write_table_csv([{"a": 1, "b": 0.5, "c": True}, {"a": 2, "b": math.pi, "c": False}], tmp_path / "t.csv",
                    ["b", "a", "c"])
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines == ["b,a,c", "0.5,1,true", "3.1415926535897931,2,false"]


def test_atomic_write_leaves_no_temporaries(tmp_path):
    atomic_write(tmp_path / "sub" / "f.txt", "one\n")
    atomic_write(tmp_path / "sub" / "f.txt", "two\n")
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["f.txt"]
    assert (tmp_path / "sub" / "f.txt").read_text() == "two\n"


def test_svg_is_well_formed(tmp_path):
    import xml.etree.ElementTree as ET
    line_plot_svg({"a<b": ([1, 10, 100], [1e-3, 1e-5, np.nan])}, tmp_path / "p.svg", title="t&t",
                  logx=True, logy=True, markers=True)
    root = ET.parse(tmp_path / "p.svg").getroot()
    assert root.tag.endswith("svg")


def test_default_config_is_valid():
    cfg = ExperimentConfig.from_dict({})
    assert cfg.solver.n == 101 and cfg.model.name == "dw"
    assert cfg.endpoints() == ([-1.0, 0.0], [1.0, 0.0])
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize("data", [
    {"solver": {"tol": -1}},
    {"solver": {"n": 5}},
    {"solver": {"bogus": 1}},
    {"nonsense": {}},
    {"perturbation": {"deltas": []}},
    {"perturbation": {"deltas": [-1e-3]}},
    {"model": {"name": "nope"}},
    {"output": {"formats": ["pdf"]}},
    {"stability": {"trials": 0}},
    {"solver": "fast"},
])
def test_invalid_configs_are_rejected(data):
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict(data)


def test_endpoints_required_for_models_without_defaults():
    cfg = ExperimentConfig.from_dict({"model": {"name": "quadratic"}})
    with pytest.raises(ConfigurationError):
        cfg.endpoints()


def test_overrides_and_loading(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"solver": {"n": 51}}))
    cfg = load_config(f, ["solver.tol=1e-9", "--model.params.kappa=8", "output.directory=x"])
    assert cfg.solver.n == 51 and cfg.solver.tol == 1e-9
    assert cfg.model.params == {"kappa": 8}
    assert cfg.output.directory == "x"
    with pytest.raises(ConfigurationError):
        apply_overrides({}, ["no_equals_sign"])
    with pytest.raises(ConfigurationError):
        apply_overrides({"solver": 3}, ["solver.n=3"])
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.json")
