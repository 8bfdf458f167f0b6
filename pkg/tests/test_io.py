import struct

import numpy as np
import pytest

from splatfield.errors import ParameterError
from splatfield.field import Domain, GridField, make_taylor_green, sample_grid
from splatfield.io import fmt, read_container, write_container, write_grid_csv, write_matrix, write_table_csv


def test_container_round_trip(tmp_path):
    g = sample_grid(make_taylor_green(Domain((0.0, -1.0), (2.0, 1.0))), (5, 4))
    write_container(tmp_path / "g.splf", g)
    back = read_container(tmp_path / "g.splf")
    assert back.domain == g.domain and back.resolution == g.resolution
    assert np.array_equal(back.values, g.values)


def test_container_layout(tmp_path):
    g = GridField(Domain.unit(2), (2, 3), np.arange(12.0).reshape(2, 3, 2))
    write_container(tmp_path / "g.splf", g)
    raw = (tmp_path / "g.splf").read_bytes()
    assert raw[:4] == b"SPLF"
    assert struct.unpack_from("<5I", raw, 4) == (1, 2, 2, 3, 2)
    assert struct.unpack_from("<4d", raw, 24) == (0.0, 0.0, 1.0, 1.0)
    assert np.array_equal(np.frombuffer(raw[56:], "<f8"), np.arange(12.0))


def test_container_rejects_garbage(tmp_path):
    (tmp_path / "bad").write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(ParameterError):
        read_container(tmp_path / "bad")


def test_container_truncated(tmp_path):
    g = GridField(Domain.unit(2), (2, 2), np.ones((2, 2, 1)))
    write_container(tmp_path / "g", g)
    (tmp_path / "t").write_bytes((tmp_path / "g").read_bytes()[:-8])
    with pytest.raises(ParameterError):
        read_container(tmp_path / "t")


def test_matrix_dump(tmp_path):
    m = np.arange(6.0).reshape(2, 3)
    write_matrix(tmp_path / "m", m)
    assert np.array_equal(read_container(tmp_path / "m").values[..., 0], m)


def test_grid_csv(tmp_path):
    g = sample_grid(make_taylor_green(), 2)
    write_grid_csv(tmp_path / "g.csv", g)
    lines = (tmp_path / "g.csv").read_bytes().decode("utf-8").split("\n")
    assert lines[0] == "x1,x2,c0,c1,c2"
    assert len(lines) == 6 and lines[-1] == ""
    assert [float(v) for v in lines[1].split(",")[:2]] == [0.25, 0.25]


def test_table_csv_footer(tmp_path):
    write_table_csv(tmp_path / "t.csv", ("K", "e"), [(1, 0.1), (2, True)], ["a=1"])
    assert (tmp_path / "t.csv").read_text() == "K,e\n1,0.10000000000000001\n2,1\n# a=1\n"


def test_fmt_round_trips():
    for v in (0.1, 1 / 3, 1e-300, 123456789.123456789):
        assert float(fmt(v)) == v
