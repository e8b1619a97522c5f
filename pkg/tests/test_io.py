import math

import numpy as np
import pytest

from fdrlab import io


def test_fmt_round_trips_doubles():
    for x in (0.1, 1 / 3, 2.0 ** -40, 1e300, -7.25):
        assert float(io.fmt(x)) == x
    assert io.fmt(np.nan) == "nan" and io.fmt(-np.inf) == "-inf"
    assert io.fmt(True) == "true" and io.fmt(np.int64(3)) == "3" and io.fmt(None) == ""


def test_matrix_round_trip_and_lf(tmp_path, rng):
    A = rng.standard_normal((4, 3))
    path = tmp_path / "a.csv"
    io.write_matrix(path, A)
    assert np.array_equal(io.read_matrix(path), A)
    raw = path.read_bytes()
    assert b"\r\n" not in raw and raw.startswith(b"x0,x1,x2\n")


def test_read_matrix_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,zz\n")
    with pytest.raises(ValueError):
        io.read_matrix(p)
    p.write_text("a,b\n")
    with pytest.raises(ValueError):
        io.read_matrix(p)


def test_rows_and_json(tmp_path):
    io.write_rows(tmp_path / "r.csv", [{"a": 1, "b": 0.5}, {"a": 2, "b": math.inf}])
    rows = io.read_rows(tmp_path / "r.csv")
    assert rows == [{"a": "1", "b": "0.5"}, {"a": "2", "b": "inf"}]
    io.write_json(tmp_path / "m.json", {"z": np.float64(np.nan), "a": np.arange(2)})
    text = (tmp_path / "m.json").read_text()
    assert text.endswith("}\n") and text.index('"a"') < text.index('"z"')
    assert io.read_json(tmp_path / "m.json") == {"a": [0, 1], "z": "nan"}
