import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from roughwave import eikonal, io, metric, sphere
from roughwave.errors import SchemaMismatchError

arrays = hnp.arrays(np.float64, hnp.array_shapes(min_dims=1, max_dims=3, max_side=5),
                    elements=st.floats(allow_nan=False, allow_infinity=True, width=64))


@given(st.dictionaries(st.text("abcdefgh_", min_size=1, max_size=6), arrays, min_size=1, max_size=4))
def test_columns_round_trip(tmp_path_factory, cols):
    path = tmp_path_factory.mktemp("cols") / "x.rwcol"
    io.write_columns(path, cols, {"k": 1})
    back, meta = io.read_columns(path)
    assert meta == {"k": 1}
    assert list(back) == list(cols)
    for k in cols:
        assert back[k].shape == cols[k].shape
        assert np.array_equal(back[k], cols[k])


def test_binary_layout(tmp_path):
    path = io.write_columns(tmp_path / "a.rwcol", {"u": np.arange(3.0)})
    raw = path.read_bytes()
    assert raw[:8] == b"RWCOL01\n"
    hl = int.from_bytes(raw[8:16], "little")
    header = json.loads(raw[16:16 + hl])
    assert header["columns"] == [{"name": "u", "shape": [3], "offset": 0, "nbytes": 24}]
    assert np.frombuffer(raw[16 + hl:], "<f8").tolist() == [0.0, 1.0, 2.0]
    assert json.loads((tmp_path / "a.rwcol.json").read_text()) == header


def test_bad_magic(tmp_path):
    p = tmp_path / "junk"
    p.write_bytes(b"not a file at all")
    with pytest.raises(ValueError):
        io.read_columns(p)


def test_optical_field_columns(tmp_path, bump):
    f = eikonal.solve_optical_function(bump, np.array([0.0, 0.6, 0.8]),
                                       (np.full(4, 0.5), np.random.default_rng(0).uniform(-1, 1, (4, 3))),
                                       derivs=True)
    io.write_columns(tmp_path / "f.rwcol", io.optical_field_columns(f))
    back, _ = io.read_columns(tmp_path / "f.rwcol")
    assert set(back) == {"t", "x", "omega", "u", "b", "N", "domega_u"}
    assert np.array_equal(back["domega_u"], f.domega_u)


def test_json_is_deterministic_and_plain():
    obj = {"b": np.float64(1.5), "a": [np.int64(2), (3, 4)], "c": {"z": math.inf, "y": float("nan")},
           "d": np.array([1.0, 2.0]), "e": np.bool_(True), "f": 1 + 2j}
    text = io.dumps(obj)
    assert text == io.dumps(dict(reversed(list(obj.items()))))
    back = json.loads(text)
    assert list(back) == ["a", "b", "c", "d", "e", "f"]
    assert back["c"] == {"y": "nan", "z": "inf"} and back["f"] == {"re": 1.0, "im": 2.0}


def test_csv_round_trip(tmp_path):
    rows = [{"j": 3, "dt": 0.1, "region": "OnS", "x": [1.0, 2.0]}, {"j": 4, "dt": 1 / 3, "region": "Exterior"}]
    p = io.write_csv(tmp_path / "t.csv", rows, ["j", "dt", "region", "x"])
    header, back = io.read_csv(p, required=["j", "dt"])
    assert header == ["j", "dt", "region", "x"]
    assert back[0] == {"j": "3", "dt": "0.1", "region": "OnS", "x": "1.0 2.0"}
    assert float(back[1]["dt"]) == 1 / 3 and back[1]["x"] == ""


def test_csv_schema_mismatch_names_column(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("j,dt\n1,2\n")
    with pytest.raises(SchemaMismatchError) as exc:
        io.read_csv(p, required=["j", "absK"])
    assert exc.value.column == "absK"
    p.write_text("j,dt,region\n1,2\n")
    with pytest.raises(SchemaMismatchError) as exc:
        io.read_csv(p)
    assert exc.value.column == "region"
    p.write_text("")
    with pytest.raises(SchemaMismatchError):
        io.read_csv(p)
