"""File access for datasets and checkpoints: atomic writes, contextual read errors."""

import os
import tempfile
from pathlib import Path
from typing import Union

from loguru import logger

from authformer.errors import StorageError

PathLike = Union[str, Path]

# Magic prefixes of the binary formats this package writes.
MAGICS = {b"ATF1": "tensor-blob", b"AFCK": "checkpoint"}


def atomic_write_bytes(path: PathLike, data: bytes) -> Path:
    """Write ``data`` to a temp file beside ``path`` and rename it into place."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=target.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, target)
    except OSError as e:
        Path(tmp).unlink(missing_ok=True)
        raise StorageError(f"could not write {target}: {e}") from e
    logger.debug(f"Wrote {len(data)} bytes to {target}")
    return target


def atomic_write_text(path: PathLike, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def read_bytes(path: PathLike, what: str = "file") -> bytes:
    source = Path(path)
    try:
        with source.open("rb") as f:
            return f.read()
    except FileNotFoundError as e:
        raise StorageError(f"{what} not found: {source}") from e
    except OSError as e:
        raise StorageError(f"could not read {what} {source}: {e}") from e


def format_of(header: bytes) -> str:
    """Name the binary format whose magic starts ``header``."""
    return MAGICS.get(bytes(header[:4]), "unknown")


def bad_magic(source: str, found: bytes, expected: bytes) -> str:
    kind = format_of(found)
    hint = "unrecognised format" if kind == "unknown" else f"this is a {kind}"
    return f"{source}: bad magic {bytes(found[:4])!r}, expected {expected!r} ({hint})"
