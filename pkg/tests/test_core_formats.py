import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ovcd import (
    FeatureMap,
    FormatError,
    InstanceMask,
    MaskSet,
    ShapeError,
    decode_runs,
    encode_runs,
    read_feature_map,
    read_label_raster,
    read_mask_set,
    upsample_bilinear,
    write_feature_map,
    write_label_raster,
    write_mask_set,
)
from oracles import upsample_oracle


class TestOvftFormat:
    def test_small_map_byte_layout(self, tmp_path):
        fmap = FeatureMap(data=np.array([[[0.5, -1.0]]], dtype=np.float32))
        path = tmp_path / "t.ovft"
        write_feature_map(fmap, path)
        raw = path.read_bytes()
        assert len(raw) == 4 + 4 + 12 + 8
        assert raw[:4] == b"OVFT"
        assert struct.unpack("<III", raw[8:20]) == (1, 1, 2)
        assert raw[20:] == struct.pack("<2f", 0.5, -1.0)

    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        fmap = FeatureMap(data=rng.standard_normal((5, 7, 3)).astype(np.float32))
        path = tmp_path / "t.ovft"
        write_feature_map(fmap, path)
        back = read_feature_map(path)
        assert back.data.tobytes() == fmap.data.tobytes()

    def test_payload_length(self, tmp_path):
        rng = np.random.default_rng(1)
        fmap = FeatureMap(data=rng.standard_normal((2, 3, 4)).astype(np.float32))
        path = tmp_path / "t.ovft"
        write_feature_map(fmap, path)
        # header 20 bytes + 2*3*4 floats
        assert path.stat().st_size == 20 + 96

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ovft"
        path.write_bytes(b"XXXX" + b"\0" * 32)
        with pytest.raises(FormatError, match="bad magic"):
            read_feature_map(path)

    def test_truncated_payload(self, tmp_path):
        fmap = FeatureMap(data=np.ones((2, 2, 2), dtype=np.float32))
        path = tmp_path / "t.ovft"
        write_feature_map(fmap, path)
        path.write_bytes(path.read_bytes()[:-1])
        with pytest.raises(FormatError, match="truncated"):
            read_feature_map(path)

    def test_non_finite_payload(self, tmp_path):
        path = tmp_path / "t.ovft"
        raw = b"OVFT" + struct.pack("<IIII", 1, 1, 1, 1) + struct.pack("<f", np.nan)
        path.write_bytes(raw)
        with pytest.raises(FormatError, match="non-finite"):
            read_feature_map(path)


class TestRle:
    def test_all_background(self):
        assert encode_runs(np.zeros((2, 2), dtype=bool)) == [4]

    def test_all_foreground(self):
        assert encode_runs(np.ones((2, 2), dtype=bool)) == [0, 4]

    def test_hand_traced_row(self):
        assert encode_runs(np.array([[0, 1, 1, 0]], dtype=bool)) == [1, 2, 1]

    def test_run_sum_mismatch(self):
        with pytest.raises(FormatError, match="run sum"):
            decode_runs([3], 2, 2)

    @given(
        st.integers(1, 12),
        st.integers(1, 12),
        st.integers(0, 2**32 - 1),
    )
    @settings(max_examples=60, deadline=None)
    def test_round_trip_identity(self, h, w, seed):
        rng = np.random.default_rng(seed)
        dense = rng.random((h, w)) < 0.5
        runs = encode_runs(dense)
        assert sum(runs) == h * w
        assert np.array_equal(decode_runs(runs, h, w), dense)


class TestMaskSidecar:
    def test_round_trip_with_scores(self, tmp_path):
        m = InstanceMask.from_dense(np.eye(4, dtype=bool))
        path = tmp_path / "m.json"
        write_mask_set(MaskSet(masks=[m, m]), path, scores=[0.5, -0.25])
        back, scores = read_mask_set(path)
        assert [tuple(x.runs) for x in back] == [m.runs, m.runs]
        assert scores == [0.5, -0.25]

    def test_mixed_dims_rejected(self):
        a = InstanceMask.from_dense(np.zeros((2, 2), dtype=bool))
        b = InstanceMask.from_dense(np.zeros((3, 3), dtype=bool))
        with pytest.raises(ShapeError):
            MaskSet(masks=[a, b])


class TestLabelRaster:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        raster = rng.integers(0, 4, size=(9, 11))
        path = tmp_path / "r.json"
        write_label_raster(raster, path)
        assert np.array_equal(read_label_raster(path), raster)


class TestBilinear:
    def test_constant_preserved(self):
        fmap = FeatureMap(data=np.full((3, 5, 2), 1.25, dtype=np.float32))
        up = upsample_bilinear(fmap, 17, 9)
        assert np.array_equal(up.data, np.full((17, 9, 2), 1.25, dtype=np.float32))

    def test_single_patch_replicates(self):
        fmap = FeatureMap(data=np.array([[[3.0, -2.0]]], dtype=np.float32))
        up = upsample_bilinear(fmap, 4, 6)
        assert np.array_equal(up.data, np.broadcast_to([3.0, -2.0], (4, 6, 2)))

    def test_two_by_two_matches_oracle(self):
        data = np.array([[[0.0], [1.0]], [[2.0], [3.0]]], dtype=np.float32)
        up = upsample_bilinear(FeatureMap(data=data), 4, 4)
        expected = upsample_oracle(data, 4, 4)
        np.testing.assert_allclose(up.data, expected, rtol=1e-6)

    def test_random_matches_oracle(self):
        rng = np.random.default_rng(2)
        data = rng.standard_normal((3, 4, 2)).astype(np.float32)
        up = upsample_bilinear(FeatureMap(data=data), 13, 7)
        np.testing.assert_allclose(
            up.data, upsample_oracle(data, 13, 7), rtol=1e-5, atol=1e-6
        )

    def test_bounds_within_input_range(self):
        rng = np.random.default_rng(3)
        data = rng.standard_normal((4, 4, 3)).astype(np.float32)
        up = upsample_bilinear(FeatureMap(data=data), 19, 23)
        for ch in range(3):
            assert up.data[:, :, ch].min() >= data[:, :, ch].min() - 1e-6
            assert up.data[:, :, ch].max() <= data[:, :, ch].max() + 1e-6

    def test_bad_target_dims(self):
        fmap = FeatureMap(data=np.ones((2, 2, 1), dtype=np.float32))
        with pytest.raises(ShapeError):
            upsample_bilinear(fmap, 0, 4)
