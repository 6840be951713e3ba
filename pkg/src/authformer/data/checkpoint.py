"""Single-file checkpoints (``.afck``).

Layout (little-endian)::

    "AFCK" | version u32 | config_len u32 | config JSON (UTF-8)
    | n_entries u32 | n x (name_len u32 | name UTF-8 | TensorBlob)
    | CRC-32 u32 over every preceding byte
"""

import struct
import zlib

from loguru import logger
from pydantic import ValidationError

from authformer.config import ModelConfig
from authformer.data.blob import decode_blob, encode_blob
from authformer.data.storage import PathLike, atomic_write_bytes, bad_magic, read_bytes
from authformer.errors import AuthFormerValidationError, ChecksumError, FormatError, UnsupportedVersionError
from authformer.model.params import AuthFormerParams, init_params

MAGIC = b"AFCK"
VERSION = 1


def encode_checkpoint(params: AuthFormerParams, config: ModelConfig) -> bytes:
    config_json = config.model_dump_json().encode("utf-8")
    named = params.named_tensors()
    parts = [MAGIC, struct.pack("<II", VERSION, len(config_json)), config_json, struct.pack("<I", len(named))]
    for name, tensor in named:
        raw = name.encode("utf-8")
        parts += [struct.pack("<I", len(raw)), raw, encode_blob(tensor.data)]
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def save_checkpoint(params: AuthFormerParams, config: ModelConfig, path: PathLike) -> None:
    data = encode_checkpoint(params, config)
    atomic_write_bytes(path, data)
    logger.info(f"Checkpoint saved to {path} ({len(params.named_tensors())} tensors, {len(data)} bytes)")


def _take_u32(buf: bytes, pos: int, source: str, field: str) -> tuple[int, int]:
    if len(buf) < pos + 4:
        raise FormatError(f"{source}: truncated at field '{field}'")
    return struct.unpack_from("<I", buf, pos)[0], pos + 4


def decode_checkpoint(buf: bytes, source: str = "<memory>") -> tuple[AuthFormerParams, ModelConfig]:
    if buf[:4] != MAGIC:
        raise FormatError(bad_magic(source, buf[:4], MAGIC))
    version, pos = _take_u32(buf, 4, source, "version")
    if version != VERSION:
        raise UnsupportedVersionError(f"{source}: checkpoint version {version} is not supported (expected {VERSION})")
    if len(buf) < 12:
        raise FormatError(f"{source}: truncated at field 'checksum'")
    stored = struct.unpack_from("<I", buf, len(buf) - 4)[0]
    body = buf[:-4]
    if zlib.crc32(body) & 0xFFFFFFFF != stored:
        raise ChecksumError(f"{source}: checksum mismatch, file is corrupted")

    config_len, pos = _take_u32(body, pos, source, "config_len")
    if len(body) < pos + config_len:
        raise FormatError(f"{source}: truncated at field 'config'")
    try:
        config = ModelConfig.model_validate_json(body[pos : pos + config_len])
    except ValidationError as e:
        raise FormatError(f"{source}: invalid field 'config': {e}") from e
    pos += config_len

    n_entries, pos = _take_u32(body, pos, source, "n_entries")
    state = {}
    for i in range(n_entries):
        name_len, pos = _take_u32(body, pos, source, f"entries[{i}].name_len")
        if len(body) < pos + name_len:
            raise FormatError(f"{source}: truncated at field 'entries[{i}].name'")
        name = body[pos : pos + name_len].decode("utf-8")
        pos += name_len
        state[name], pos = decode_blob(body, pos, f"{source} entry '{name}'")
    if pos != len(body):
        raise FormatError(f"{source}: {len(body) - pos} unexpected bytes before checksum")

    params = init_params(config, seed=0)
    try:
        params.load_state(state)
    except AuthFormerValidationError as e:
        raise FormatError(f"{source}: parameters do not match config: {e}") from e
    return params, config


def load_checkpoint(path: PathLike) -> tuple[AuthFormerParams, ModelConfig]:
    params, config = decode_checkpoint(read_bytes(path, "checkpoint"), str(path))
    logger.info(f"Checkpoint loaded from {path} ({params.count()} parameters)")
    return params, config
