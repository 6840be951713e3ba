"""TensorBlob: a minimal little-endian array file.

Layout::

    "ATF1" | dtype code (u8: 0=f32, 1=f64) | rank (u32) | dims (rank x u32) | payload

All integers and the row-major payload are little-endian.
"""

import struct

import numpy as np

from authformer.data.storage import PathLike, atomic_write_bytes, bad_magic, read_bytes
from authformer.errors import AuthFormerValidationError, FormatError

MAGIC = b"ATF1"
_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_NATIVE = {0: np.float32, 1: np.float64}


def _code_for(dtype: np.dtype) -> int:
    if dtype == np.float32:
        return 0
    if dtype == np.float64:
        return 1
    raise AuthFormerValidationError(f"tensor blobs hold float32 or float64, got {dtype}")


def encode_blob(array: np.ndarray) -> bytes:
    array = np.asarray(array)
    code = _code_for(array.dtype)
    header = MAGIC + struct.pack("<BI", code, array.ndim) + struct.pack(f"<{array.ndim}I", *array.shape)
    return header + np.ascontiguousarray(array, dtype=_CODES[code]).tobytes()


def decode_blob(buf: bytes, offset: int = 0, source: str = "<memory>") -> tuple[np.ndarray, int]:
    """Decode one blob starting at ``offset``; returns the array and the offset just past it."""
    if buf[offset : offset + 4] != MAGIC:
        raise FormatError(bad_magic(source, buf[offset : offset + 4], MAGIC))
    pos = offset + 4
    if len(buf) < pos + 5:
        raise FormatError(f"{source}: truncated header (dtype/rank)")
    code, rank = struct.unpack_from("<BI", buf, pos)
    pos += 5
    if code not in _CODES:
        raise FormatError(f"{source}: unknown dtype code {code}")
    if len(buf) < pos + 4 * rank:
        raise FormatError(f"{source}: truncated header (dims, rank {rank})")
    dims = struct.unpack_from(f"<{rank}I", buf, pos)
    pos += 4 * rank
    nbytes = int(np.prod(dims, dtype=np.int64)) * _CODES[code].itemsize
    if len(buf) < pos + nbytes:
        raise FormatError(
            f"{source}: truncated payload, expected {nbytes} bytes for shape {list(dims)}, "
            f"found {len(buf) - pos}"
        )
    array = np.frombuffer(buf, dtype=_CODES[code], count=nbytes // _CODES[code].itemsize, offset=pos)
    return array.reshape(dims).astype(_NATIVE[code]), pos + nbytes


def write_blob(path: PathLike, array: np.ndarray) -> None:
    atomic_write_bytes(path, encode_blob(array))


def read_blob(path: PathLike) -> np.ndarray:
    buf = read_bytes(path, "tensor blob")
    array, end = decode_blob(buf, 0, str(path))
    if end != len(buf):
        raise FormatError(f"{path}: {len(buf) - end} trailing bytes after payload")
    return array
