"""Binary tensor files.

Layout (all little-endian)::

    offset 0   4s   magic b"WDCV"
    offset 4   u32  format version
    offset 8   u32  dtype code (1 = float32, 2 = float64)
    offset 12  u32  rank
    offset 16  u64 * rank   dims
    ...        row-major samples
"""

import struct
from pathlib import Path

import numpy as np

from .core import FormatError

MAGIC = b"WDCV"
VERSION = 1
_HEADER = struct.Struct("<4sIII")
_DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODE_OF = {np.dtype(np.float32): 1, np.dtype(np.float64): 2}


def dumps_tensor(arr) -> bytes:
    arr = np.asarray(arr)
    code = _CODE_OF.get(arr.dtype)
    if code is None:
        raise FormatError(f"unsupported dtype {arr.dtype}; use float32 or float64")
    header = _HEADER.pack(MAGIC, VERSION, code, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return header + dims + np.ascontiguousarray(arr, dtype=_DTYPE_CODES[code]).tobytes()


def loads_tensor(buf: bytes, source: str = "<bytes>") -> np.ndarray:
    if len(buf) < _HEADER.size:
        raise FormatError(f"truncated header ({len(buf)} of {_HEADER.size} bytes)", f"{source}@0")
    magic, version, code, rank = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", f"{source}@0")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", f"{source}@4")
    if code not in _DTYPE_CODES:
        raise FormatError(f"unknown dtype code {code}", f"{source}@8")
    off = _HEADER.size
    if len(buf) < off + 8 * rank:
        raise FormatError(f"truncated dims for rank {rank}", f"{source}@{off}")
    dims = struct.unpack_from(f"<{rank}Q", buf, off)
    off += 8 * rank
    dtype = _DTYPE_CODES[code]
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    if len(buf) - off != expected:
        raise FormatError(
            f"payload is {len(buf) - off} bytes, dims {tuple(dims)} need {expected}",
            f"{source}@{off}",
        )
    data = np.frombuffer(buf, dtype=dtype, offset=off).reshape(dims)
    return data.astype(dtype.newbyteorder("="), copy=True)


def save_tensor(arr, path) -> None:
    Path(path).write_bytes(dumps_tensor(arr))


def load_tensor(path) -> np.ndarray:
    path = Path(path)
    return loads_tensor(path.read_bytes(), str(path))
