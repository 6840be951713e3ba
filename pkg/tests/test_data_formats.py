import struct
import zlib

import numpy as np
import pytest

from authformer.config import tiny_model_config
from authformer.data.blob import decode_blob, encode_blob, read_blob, write_blob
from authformer.data.checkpoint import decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from authformer.data.storage import atomic_write_bytes, format_of
from authformer.errors import (
    AuthFormerValidationError,
    ChecksumError,
    FormatError,
    StorageError,
    UnsupportedVersionError,
)
from authformer.model.params import init_params

GOLDEN_F32 = bytes.fromhex("41544631" "00" "02000000" "01000000" "02000000" "0000803f" "00000040")
GOLDEN_F64 = bytes.fromhex("41544631" "01" "01000000" "01000000" "000000000000f83f")


class TestTensorBlob:
    def test_golden_float32(self):
        assert encode_blob(np.array([[1.0, 2.0]], dtype=np.float32)) == GOLDEN_F32

    def test_golden_float64(self):
        assert encode_blob(np.array([1.5], dtype=np.float64)) == GOLDEN_F64

    def test_decode_golden(self):
        array, end = decode_blob(GOLDEN_F32)
        assert array.dtype == np.float32
        assert array.tolist() == [[1.0, 2.0]]
        assert end == len(GOLDEN_F32)

    def test_file_round_trip(self, tmp_path):
        data = np.random.default_rng(0).normal(size=(3, 2, 5)).astype(np.float32)
        write_blob(tmp_path / "x.atf", data)
        back = read_blob(tmp_path / "x.atf")
        assert back.dtype == np.float32
        assert back.tobytes() == data.tobytes()
        assert format_of((tmp_path / "x.atf").read_bytes()) == "tensor-blob"

    def test_bad_magic(self):
        with pytest.raises(FormatError, match="unrecognised format"):
            decode_blob(b"XTF1" + GOLDEN_F32[4:])

    def test_truncated_payload(self):
        with pytest.raises(FormatError, match="truncated payload"):
            decode_blob(GOLDEN_F32[:-1])

    def test_unknown_dtype_code(self):
        with pytest.raises(FormatError, match="dtype code 7"):
            decode_blob(GOLDEN_F32[:4] + b"\x07" + GOLDEN_F32[5:])

    def test_trailing_bytes(self, tmp_path):
        (tmp_path / "y.atf").write_bytes(GOLDEN_F32 + b"\x00")
        with pytest.raises(FormatError, match="trailing"):
            read_blob(tmp_path / "y.atf")

    def test_integer_arrays_rejected(self):
        with pytest.raises(AuthFormerValidationError, match="float32 or float64"):
            encode_blob(np.arange(3))

    def test_missing_file(self, tmp_path):
        with pytest.raises(StorageError, match="not found"):
            read_blob(tmp_path / "absent.atf")


@pytest.fixture
def checkpoint_bytes():
    config = tiny_model_config()
    params = init_params(config, seed=11)
    return params, config, encode_checkpoint(params, config)


class TestCheckpoint:
    def test_layout(self, checkpoint_bytes):
        params, config, data = checkpoint_bytes
        config_json = config.model_dump_json().encode("utf-8")
        assert data[:4] == b"AFCK"
        assert struct.unpack_from("<II", data, 4) == (1, len(config_json))
        assert data[12 : 12 + len(config_json)] == config_json
        assert struct.unpack_from("<I", data, 12 + len(config_json))[0] == len(params.named_tensors())
        assert struct.unpack("<I", data[-4:])[0] == zlib.crc32(data[:-4])

    def test_round_trip_is_bitwise(self, tmp_path, checkpoint_bytes):
        params, config, _ = checkpoint_bytes
        path = tmp_path / "model.afck"
        save_checkpoint(params, config, path)
        loaded, loaded_config = load_checkpoint(path)
        assert loaded_config == config
        original, restored = params.state(), loaded.state()
        assert original.keys() == restored.keys()
        for name in original:
            assert original[name].dtype == restored[name].dtype
            assert original[name].tobytes() == restored[name].tobytes()
        assert format_of(path.read_bytes()) == "checkpoint"

    def test_shared_norm_survives_round_trip(self, checkpoint_bytes):
        _, _, data = checkpoint_bytes
        loaded, _ = decode_checkpoint(data)
        assert loaded.grn.norm is loaded.output_norm

    def test_flipped_byte_fails_checksum(self, checkpoint_bytes):
        _, _, data = checkpoint_bytes
        corrupted = bytearray(data)
        corrupted[len(data) // 2] ^= 0xFF
        with pytest.raises(ChecksumError, match="checksum"):
            decode_checkpoint(bytes(corrupted))

    def test_wrong_magic(self, checkpoint_bytes):
        _, _, data = checkpoint_bytes
        with pytest.raises(FormatError, match="bad magic"):
            decode_checkpoint(b"XFCK" + data[4:])

    def test_blob_passed_as_checkpoint_is_named(self, tmp_path):
        write_blob(tmp_path / "weights.atf", np.zeros(2, dtype=np.float32))
        with pytest.raises(FormatError, match="weights.atf.*this is a tensor-blob"):
            load_checkpoint(tmp_path / "weights.atf")

    def test_checkpoint_passed_as_blob_is_named(self, tmp_path, checkpoint_bytes):
        _, _, data = checkpoint_bytes
        (tmp_path / "model.afck").write_bytes(data)
        with pytest.raises(FormatError, match="this is a checkpoint"):
            read_blob(tmp_path / "model.afck")

    def test_unsupported_version(self, checkpoint_bytes):
        _, _, data = checkpoint_bytes
        with pytest.raises(UnsupportedVersionError, match="version 2"):
            decode_checkpoint(data[:4] + struct.pack("<I", 2) + data[8:])

    def test_truncated(self):
        with pytest.raises(FormatError, match="truncated"):
            decode_checkpoint(b"AFCK\x01\x00")


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "nested" / "out.bin"
    atomic_write_bytes(target, b"abc")
    atomic_write_bytes(target, b"defg")
    assert target.read_bytes() == b"defg"
    assert sorted(p.name for p in target.parent.iterdir()) == ["out.bin"]
