"""EVOM checkpoint format: round trips, validation errors, and name contracts."""

import struct

import numpy as np
import pytest

from evoroc.checkpoint import (
    HEAD_NAMES,
    MODEL_NAMES,
    load_head,
    load_model,
    load_tensors,
    save_head,
    save_model,
    save_tensors,
)
from evoroc.errors import FormatError
from evoroc.evo import extract_head, random_head
from evoroc.nn import build_model
from evoroc.rng import RngStream


class TestModelRoundTrip:
    def test_bit_identity(self, tmp_path):
        model = build_model(RngStream(0))
        path = tmp_path / "m.evom"
        save_model(model, path)
        loaded = load_model(path)
        for name, arr in model.parameters().items():
            assert arr.tobytes() == loaded.parameters()[name].tobytes()

    def test_tensor_names(self, tmp_path):
        model = build_model(RngStream(1))
        path = tmp_path / "m.evom"
        save_model(model, path)
        assert tuple(load_tensors(path).keys()) == MODEL_NAMES

    def test_deterministic_bytes(self, tmp_path):
        model = build_model(RngStream(2))
        p1, p2 = tmp_path / "a.evom", tmp_path / "b.evom"
        save_model(model, p1)
        save_model(model, p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestHeadRoundTrip:
    def test_bit_identity(self, tmp_path):
        head = random_head(RngStream(3))
        path = tmp_path / "h.evom"
        save_head(head, path)
        loaded = load_head(path)
        for name, arr in head.parameters().items():
            assert arr.tobytes() == loaded.parameters()[name].tobytes()

    def test_tensor_names(self, tmp_path):
        head = extract_head(build_model(RngStream(4)))
        path = tmp_path / "h.evom"
        save_head(head, path)
        assert tuple(load_tensors(path).keys()) == HEAD_NAMES


class TestValidation:
    def _model_file(self, tmp_path):
        path = tmp_path / "m.evom"
        save_model(build_model(RngStream(5)), path)
        return path

    def test_bad_magic(self, tmp_path):
        path = self._model_file(tmp_path)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"XXXX"
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="magic"):
            load_tensors(path)

    def test_bad_version(self, tmp_path):
        path = self._model_file(tmp_path)
        blob = bytearray(path.read_bytes())
        blob[4:8] = struct.pack("<I", 7)
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="version"):
            load_tensors(path)

    def test_truncation(self, tmp_path):
        path = self._model_file(tmp_path)
        path.write_bytes(path.read_bytes()[:-100])
        with pytest.raises(FormatError):
            load_tensors(path)

    def test_trailing_garbage(self, tmp_path):
        path = self._model_file(tmp_path)
        path.write_bytes(path.read_bytes() + b"\x00" * 4)
        with pytest.raises(FormatError, match="trailing"):
            load_tensors(path)

    def test_missing_tensor_for_model(self, tmp_path):
        path = tmp_path / "h.evom"
        save_head(random_head(RngStream(6)), path)  # head file lacks conv tensors
        with pytest.raises(FormatError, match="missing"):
            load_model(path)

    def test_missing_tensor_for_head(self, tmp_path):
        path = tmp_path / "t.evom"
        save_tensors({"fc1.w": np.zeros((2, 2), np.float32)}, path)
        with pytest.raises(FormatError, match="missing"):
            load_head(path)
