import gzip

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from contribval.idx import (
    IdxDimMismatchError,
    IdxMagicError,
    IdxTrailingDataError,
    IdxTruncatedError,
    encode_idx,
    load_idx_pair,
    parse_idx,
    read_idx,
    write_idx,
)

GOLDEN = bytes([0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2, 1, 2, 3, 4])


def test_golden_file(tmp_path):
    p = tmp_path / "img.idx"
    p.write_bytes(GOLDEN)
    t = read_idx(p)
    assert list(t.dims) == [1, 2, 2]
    assert t.data.tolist() == [1, 2, 3, 4]


def test_truncated_names_counts():
    with pytest.raises(IdxTruncatedError) as e:
        parse_idx(GOLDEN[:-2])
    assert e.value.expected == 4 and e.value.actual == 2
    assert "expected 4" in str(e.value) and "found 2" in str(e.value)
    with pytest.raises(IdxTruncatedError):
        parse_idx(GOLDEN[:6])
    with pytest.raises(IdxTruncatedError):
        parse_idx(b"\x00\x00")


def test_bad_magic():
    with pytest.raises(IdxMagicError):
        parse_idx(b"\x01" + GOLDEN[1:])
    with pytest.raises(IdxMagicError):
        parse_idx(GOLDEN[:2] + b"\x0d" + GOLDEN[3:])


def test_trailing_bytes():
    with pytest.raises(IdxTrailingDataError):
        parse_idx(GOLDEN + b"\x00")


def test_distinct_error_types():
    kinds = {IdxMagicError, IdxTruncatedError, IdxTrailingDataError, IdxDimMismatchError}
    assert len(kinds) == 4
    for a in kinds:
        for b in kinds - {a}:
            assert not issubclass(a, b)


def test_pair_check(tmp_path):
    write_idx(tmp_path / "i.idx", np.zeros((3, 2, 2), np.uint8))
    write_idx(tmp_path / "l.idx", np.array([0, 1, 2], np.uint8))
    write_idx(tmp_path / "l2.idx", np.array([0, 1], np.uint8))
    X, y = load_idx_pair(tmp_path / "i.idx", tmp_path / "l.idx")
    assert X.shape == (3, 4) and y.tolist() == [0, 1, 2]
    with pytest.raises(IdxDimMismatchError):
        load_idx_pair(tmp_path / "i.idx", tmp_path / "l2.idx")
    with pytest.raises(IdxDimMismatchError):
        load_idx_pair(tmp_path / "i.idx", tmp_path / "i.idx")


def test_gzip(tmp_path):
    a = np.arange(24, dtype=np.uint8).reshape(2, 3, 4)
    write_idx(tmp_path / "a.idx.gz", a)
    with gzip.open(tmp_path / "a.idx.gz", "rb") as fh:
        assert fh.read() == encode_idx(a)
    assert np.array_equal(read_idx(tmp_path / "a.idx.gz").array(), a)


def test_encode_rejects_out_of_range():
    with pytest.raises(ValueError):
        encode_idx(np.array([256]))
    with pytest.raises(ValueError):
        encode_idx(np.array([0.5]))


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.uint8, hnp.array_shapes(min_dims=1, max_dims=4, min_side=0, max_side=5)))
def test_roundtrip(a):
    t = parse_idx(encode_idx(a))
    assert t.dims == a.shape
    assert np.array_equal(t.array(), a)


@settings(max_examples=100, deadline=None)
@given(st.binary(max_size=64))
def test_garbage_never_crashes(raw):
    try:
        parse_idx(raw)
    except ValueError:
        pass
