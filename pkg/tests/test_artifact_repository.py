import math
import sys

import numpy as np
import pytest

from repositories.artifact_repository import MANIFEST_NAME, ArtifactRepository, ValueFormatter

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@pytest.fixture
def artifacts(tmp_path):
    return ArtifactRepository(str(tmp_path / "run"), run_metadata={"command": "rate"})


def test_numbers_keep_full_precision():
    formatter = ValueFormatter()
    assert float(formatter.number(0.1)) == 0.1
    assert float(formatter.number(math.pi)) == math.pi
    assert formatter.number(math.inf) == "inf"
    assert formatter.number(-math.inf) == "-inf"
    assert formatter.number(math.nan) == "nan"


def test_cells():
    formatter = ValueFormatter()
    assert formatter.cell(True) == "true"
    assert formatter.cell(None) == ""
    assert formatter.cell(np.int64(3)) == "3"
    assert formatter.cell(np.array([1.0, 0.5])) == "1;0.5"


def test_csv_has_metadata_lines_then_header(artifacts):
    path = artifacts.write_csv("table.csv", ["x", "q"], [[0.0, 1.5], [1.0, 2.5]], {"regime": 1})
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines == ["# command = rate", "# regime = 1", "x,q", "0,1.5", "1,2.5"]


def test_stamp_marks_later_artifacts(artifacts):
    artifacts.stamp("unvalidated", True)
    path = artifacts.write_key_values("report.txt", [("passed", False)])
    assert path.read_text(encoding="utf-8").splitlines() == [
        "# command = rate", "# unvalidated = true", "passed = false"
    ]


def test_manifest_is_valid_toml(artifacts):
    config = {
        "command": "estimate",
        "overrides": {"A": 2.0, "x0": 0.25},
        "eps": [0.1, 0.05],
        "event": "eta1>=0.5",
        "force": False,
        "seed": 12,
        "x": None,
    }
    path = artifacts.write_manifest(config)
    assert path.name == MANIFEST_NAME
    with path.open("rb") as handle:
        document = tomllib.load(handle)
    assert document == {
        "command": "estimate",
        "overrides": {"A": 2.0, "x0": 0.25},
        "eps": [0.1, 0.05],
        "event": "eta1>=0.5",
        "force": False,
        "seed": 12,
    }


def test_plotdata_is_long_format(artifacts):
    series = {"q": ([0.0, 1.0], [1.2, 1.3]), "kappa_d": ([0.0, 1.0], [0.0, -0.5])}
    path = artifacts.emit_plotdata("rate_plot.csv", series, abscissa="x")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[1] == "series,x,value"
    assert lines[2:] == ["q,0,1.2", "q,1,1.3", "kappa_d,0,0", "kappa_d,1,-0.5"]


def test_writes_are_deterministic(tmp_path):
    rows = [[k * 0.1, math.sin(k)] for k in range(10)]
    first = ArtifactRepository(str(tmp_path / "a")).write_csv("t.csv", ["t", "v"], rows)
    second = ArtifactRepository(str(tmp_path / "b")).write_csv("t.csv", ["t", "v"], rows)
    assert first.read_bytes() == second.read_bytes()
