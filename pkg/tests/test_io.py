"""Canonical tensor container and labeled-PLY format tests."""

from __future__ import annotations

import struct

import numpy as np
import pytest

from radarlabel.plyio import PALETTE, export_ply, read_labeled_ply
from radarlabel.tensorio import (HEADER_SIZE, MAGIC, MalformedTensorError,
                                 read_tensor, write_tensor)
from radarlabel.transfer import LabeledPointCloud


class TestTensorContainer:
    @pytest.mark.parametrize("dtype", ["<f4", "<f8", "<i4", "<i8", "u1", "<u2"])
    def test_round_trip_dtypes(self, tmp_path, dtype):
        rng = np.random.default_rng(71)
        arr = (rng.uniform(0, 100, size=(3, 4, 5))).astype(dtype)
        path = tmp_path / "t.tensor"
        write_tensor(arr, path)
        back = read_tensor(path)
        assert back.dtype == np.dtype(dtype)
        assert back.shape == (3, 4, 5)
        np.testing.assert_array_equal(back, arr)

    def test_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(72)
        arr = rng.normal(size=(10, 20))
        path = tmp_path / "t.tensor"
        write_tensor(arr, path)
        assert read_tensor(path).tobytes() == arr.tobytes()

    def test_header_is_64_bytes(self, tmp_path):
        path = tmp_path / "t.tensor"
        write_tensor(np.zeros(7, dtype=np.float32), path)
        raw = path.read_bytes()
        assert len(raw) == HEADER_SIZE + 7 * 4
        assert raw[:8] == MAGIC

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "t.tensor"
        write_tensor(np.zeros(3), path)
        raw = bytearray(path.read_bytes())
        raw[:8] = b"NOTMAGIC"
        path.write_bytes(bytes(raw))
        with pytest.raises(MalformedTensorError, match="magic"):
            read_tensor(path)

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "t.tensor"
        write_tensor(np.zeros((2, 3)), path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(MalformedTensorError, match="payload"):
            read_tensor(path)

    def test_dim_payload_mismatch_rejected(self, tmp_path):
        path = tmp_path / "t.tensor"
        write_tensor(np.zeros((2, 3)), path)
        raw = bytearray(path.read_bytes())
        # bump first dim from 2 to 4 in the header
        struct.pack_into("<Q", raw, 16, 4)
        path.write_bytes(bytes(raw))
        with pytest.raises(MalformedTensorError, match="payload"):
            read_tensor(path)

    def test_unknown_dtype_code_rejected(self, tmp_path):
        path = tmp_path / "t.tensor"
        write_tensor(np.zeros(2), path)
        raw = bytearray(path.read_bytes())
        struct.pack_into("<H", raw, 10, 99)
        path.write_bytes(bytes(raw))
        with pytest.raises(MalformedTensorError, match="dtype"):
            read_tensor(path)

    def test_short_file_rejected(self, tmp_path):
        path = tmp_path / "t.tensor"
        path.write_bytes(b"RLTENSOR")
        with pytest.raises(MalformedTensorError, match="truncated"):
            read_tensor(path)

    def test_empty_dim_allowed(self, tmp_path):
        path = tmp_path / "t.tensor"
        write_tensor(np.zeros((0, 5)), path)
        assert read_tensor(path).shape == (0, 5)


class TestLabeledPly:
    def _cloud(self, n=3):
        rng = np.random.default_rng(73)
        return LabeledPointCloud(points=rng.normal(size=(n, 3)),
                                 labels=rng.integers(0, 5, size=n).astype(np.uint8))

    @pytest.mark.parametrize("binary", [True, False])
    def test_round_trip(self, tmp_path, binary):
        lpc = self._cloud(3)
        path = tmp_path / "c.ply"
        export_ply(lpc, path, binary=binary)
        back = read_labeled_ply(path)
        assert back.points.tobytes() == lpc.points.tobytes()
        np.testing.assert_array_equal(back.labels, lpc.labels)

    def test_empty_cloud(self, tmp_path):
        lpc = LabeledPointCloud(points=np.empty((0, 3)), labels=np.empty(0, dtype=np.uint8))
        path = tmp_path / "c.ply"
        export_ply(lpc, path)
        back = read_labeled_ply(path)
        assert len(back) == 0

    def test_palette_is_bijective_and_applied(self, tmp_path):
        assert len(set(PALETTE.values())) == 5
        lpc = LabeledPointCloud(points=np.zeros((5, 3)),
                                labels=np.arange(5, dtype=np.uint8))
        path = tmp_path / "c.ply"
        export_ply(lpc, path, binary=False)
        body = path.read_bytes().split(b"end_header\n", 1)[1].decode().splitlines()
        for line, cls in zip(body, range(5)):
            r, g, b = (int(v) for v in line.split()[3:6])
            assert (r, g, b) == PALETTE[cls]

    def test_header_declares_vertex_properties(self, tmp_path):
        path = tmp_path / "c.ply"
        export_ply(self._cloud(2), path)
        header = path.read_bytes().split(b"end_header")[0].decode()
        for prop in ("double x", "double y", "double z",
                     "uchar red", "uchar green", "uchar blue", "uchar class"):
            assert f"property {prop}" in header

    def test_non_ply_rejected(self, tmp_path):
        path = tmp_path / "c.ply"
        path.write_bytes(b"hello world\n")
        with pytest.raises(ValueError, match="not a PLY"):
            read_labeled_ply(path)

    def test_wrong_property_set_rejected(self, tmp_path):
        path = tmp_path / "c.ply"
        path.write_bytes(b"ply\nformat ascii 1.0\nelement vertex 0\n"
                         b"property float x\nproperty float y\n"
                         b"end_header\n")
        with pytest.raises(ValueError, match="properties"):
            read_labeled_ply(path)

    def test_truncated_binary_body_rejected(self, tmp_path):
        path = tmp_path / "c.ply"
        export_ply(self._cloud(4), path)
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(ValueError, match="body"):
            read_labeled_ply(path)
