"""Round-trip and determinism tests for the binary tensor container."""

import numpy as np
import pytest

from modtag.tensor_io import MAGIC, ContainerError, read_tensors, write_tensors


def _sample_tensors(rng):
    return {
        "weights": rng.normal(size=(3, 4)).astype(np.float32),
        "bias": rng.normal(size=(4,)).astype(np.float64),
        "steps": np.arange(6, dtype=np.int64).reshape(2, 3),
        "empty_name_ok": np.zeros((0, 5), dtype=np.float32),
    }


def test_round_trip_preserves_values_shapes_dtypes(tmp_path):
    rng = np.random.default_rng(7)
    tensors = _sample_tensors(rng)
    meta = {"kind": "checkpoint", "epoch": 3}
    path = tmp_path / "t.bin"
    write_tensors(path, tensors, meta)

    out, out_meta = read_tensors(path)
    assert out_meta == meta
    assert set(out) == set(tensors)
    for name, arr in tensors.items():
        assert out[name].dtype == arr.dtype
        assert out[name].shape == arr.shape
        np.testing.assert_array_equal(out[name], arr)


def test_write_is_byte_deterministic(tmp_path):
    rng = np.random.default_rng(11)
    tensors = _sample_tensors(rng)
    meta = {"b": 1, "a": {"nested": [1, 2, 3]}}

    p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
    write_tensors(p1, tensors, meta)
    # same content, different insertion order
    shuffled = dict(reversed(list(tensors.items())))
    write_tensors(p2, shuffled, {"a": {"nested": [1, 2, 3]}, "b": 1})
    assert p1.read_bytes() == p2.read_bytes()


def test_file_starts_with_magic(tmp_path):
    path = tmp_path / "t.bin"
    write_tensors(path, {"x": np.ones(2, dtype=np.float32)}, {})
    assert path.read_bytes()[:8] == MAGIC


def test_rejects_bad_magic(tmp_path):
    path = tmp_path / "t.bin"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 64)
    with pytest.raises(ContainerError):
        read_tensors(path)


def test_rejects_truncated_payload(tmp_path):
    path = tmp_path / "t.bin"
    write_tensors(path, {"x": np.ones((100,), dtype=np.float32)}, {})
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) - 32])
    with pytest.raises(ContainerError):
        read_tensors(path)


def test_rejects_truncated_header(tmp_path):
    path = tmp_path / "t.bin"
    path.write_bytes(MAGIC + (10_000).to_bytes(8, "little") + b"{}")
    with pytest.raises(ContainerError):
        read_tensors(path)


def test_rejects_unsupported_dtype(tmp_path):
    path = tmp_path / "t.bin"
    with pytest.raises(ContainerError):
        write_tensors(path, {"x": np.ones(3, dtype=np.int16)}, {})


def test_meta_survives_unicode_and_nesting(tmp_path):
    path = tmp_path / "t.bin"
    meta = {"label": "café", "cfg": {"lr": 1e-4, "tags": ["a", "b"]}}
    write_tensors(path, {"x": np.zeros(1, dtype=np.float32)}, meta)
    _, out_meta = read_tensors(path)
    assert out_meta == meta
