"""IDX container (the MNIST file format), unsigned-byte payloads only.

Layout: ``00 00 08 <ndim>``, then ``ndim`` big-endian uint32 sizes, then the
raw bytes in C order.  Files ending in ``.gz`` are read and written gzipped.
"""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass

import numpy as np

UBYTE = 0x08


class IdxFormatError(ValueError):
    pass


class IdxMagicError(IdxFormatError):
    pass


class IdxTruncatedError(IdxFormatError):
    def __init__(self, what: str, expected: int, actual: int, source: str = "<bytes>"):
        self.expected, self.actual = expected, actual
        super().__init__(f"{source}: truncated {what}: expected {expected} bytes, found {actual}")


class IdxTrailingDataError(IdxFormatError):
    pass


class IdxDimMismatchError(IdxFormatError):
    pass


@dataclass(frozen=True, eq=False)
class IdxTensor:
    dims: tuple[int, ...]
    data: np.ndarray  # flat uint8

    def __post_init__(self) -> None:
        if self.data.dtype != np.uint8 or self.data.ndim != 1:
            raise ValueError("data must be a flat uint8 array")
        if int(np.prod(self.dims, dtype=np.int64)) != self.data.size:
            raise IdxDimMismatchError(f"dims {list(self.dims)} do not match {self.data.size} elements")

    def array(self) -> np.ndarray:
        return self.data.reshape(self.dims)


def _open(path, mode: str):
    return gzip.open(path, mode) if os.fspath(path).endswith(".gz") else open(path, mode)


def parse_idx(raw: bytes, source: str = "<bytes>") -> IdxTensor:
    if len(raw) < 4:
        raise IdxTruncatedError("header", 4, len(raw), source)
    if raw[0] != 0 or raw[1] != 0:
        raise IdxMagicError(f"{source}: bad magic {raw[:2].hex(' ')}, expected 00 00")
    if raw[2] != UBYTE:
        raise IdxMagicError(f"{source}: unsupported element type 0x{raw[2]:02x}, only 0x08 (unsigned byte) is read")
    ndim = raw[3]
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IdxTruncatedError("dimension table", header, len(raw), source)
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    count = int(np.prod(dims, dtype=np.int64))
    payload = len(raw) - header
    if payload < count:
        raise IdxTruncatedError("payload", count, payload, source)
    if payload > count:
        raise IdxTrailingDataError(f"{source}: {payload - count} bytes after the declared payload of {count}")
    return IdxTensor(tuple(dims), np.frombuffer(raw, dtype=np.uint8, offset=header).copy())


def read_idx(path) -> IdxTensor:
    with _open(path, "rb") as fh:
        raw = fh.read()
    return parse_idx(raw, os.fspath(path))


def encode_idx(array) -> bytes:
    a = np.asarray(array)
    if a.dtype != np.uint8:
        if a.size and (a.min() < 0 or a.max() > 255 or not np.array_equal(a, np.round(a))):
            raise ValueError("values must be integers in 0..255")
        a = a.astype(np.uint8)
    if a.ndim > 255:
        raise ValueError("too many dimensions")
    header = bytes([0, 0, UBYTE, a.ndim]) + struct.pack(f">{a.ndim}I", *a.shape)
    return header + np.ascontiguousarray(a).tobytes()


def write_idx(path, array) -> None:
    with _open(path, "wb") as fh:
        fh.write(encode_idx(array))


def load_idx_pair(images_path, labels_path):
    """Images (N, ...) scaled to [0, 1] and flattened, plus int labels.

    Raises:
        IdxDimMismatchError: if labels are not 1-D or the counts differ.
    """
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if len(labels.dims) != 1:
        raise IdxDimMismatchError(f"{labels_path}: labels must be 1-D, got dims {list(labels.dims)}")
    if len(images.dims) < 1 or images.dims[0] != labels.dims[0]:
        raise IdxDimMismatchError(
            f"{images_path} holds {images.dims[0] if images.dims else 0} items but {labels_path} holds {labels.dims[0]}"
        )
    X = images.array().reshape(images.dims[0], -1).astype(np.float64) / 255.0
    return X, labels.data.astype(np.int64)
