"""Smoke training for the weakly supervised change localizer."""

import numpy as np
import pytest

import ovcd
from ovcd_adapter import (
    AdapterError,
    S2CTrainConfig,
    TrainPair,
    export_predictions,
    train_s2c,
)


def _make_pairs(n=16, size=32, seed=0):
    """Half the pairs gain a bright square in t2; the rest are unchanged."""
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(n):
        base = rng.integers(0, 60, size=(size, size, 3)).astype(np.uint8)
        t2 = base.copy()
        changed = i % 2 == 0
        proposals = None
        if changed:
            y0 = int(rng.integers(0, size - 12))
            x0 = int(rng.integers(0, size - 12))
            t2[y0 : y0 + 12, x0 : x0 + 12] = 230
            dense = np.zeros((size, size), dtype=bool)
            dense[y0 : y0 + 12, x0 : x0 + 12] = True
            proposals = ovcd.MaskSet(masks=[ovcd.InstanceMask.from_dense(dense)])
        pairs.append(TrainPair(t1=base, t2=t2, changed=changed, proposals=proposals))
    return pairs


@pytest.fixture(scope="module")
def smoke_result():
    pairs = _make_pairs()
    config = S2CTrainConfig(
        batch_size=8, iterations=50, input_size=32, learning_rate=1e-2, seed=0
    )
    return train_s2c(pairs, config), pairs


class TestTraining:
    def test_loss_decreases_on_16_pair_smoke_set(self, smoke_result):
        result, _ = smoke_result
        assert len(result.losses) == 50
        assert all(np.isfinite(result.losses))
        assert result.losses[-1] < result.losses[0]

    def test_lambda_zero_loss_equals_image_loss_exactly(self):
        pairs = _make_pairs(n=8)
        config = S2CTrainConfig(
            lam=0.0, batch_size=4, iterations=10, input_size=32, seed=0
        )
        result = train_s2c(pairs, config)
        assert result.losses == result.losses_img
        assert result.losses_pix == [0.0] * 10

    def test_deterministic_per_seed(self):
        pairs = _make_pairs(n=8)
        config = S2CTrainConfig(batch_size=4, iterations=5, input_size=32, seed=3)
        a = train_s2c(pairs, config)
        b = train_s2c(pairs, config)
        assert a.losses == b.losses

    def test_config_validation(self):
        with pytest.raises(AdapterError):
            S2CTrainConfig(lam=-0.1)
        with pytest.raises(AdapterError):
            S2CTrainConfig(input_size=30)
        with pytest.raises(AdapterError):
            S2CTrainConfig(beta=1.5)

    def test_empty_pairs_rejected(self):
        with pytest.raises(AdapterError):
            train_s2c([], S2CTrainConfig(iterations=1, input_size=32))


class TestExports:
    def test_exports_pass_primary_validators(self, smoke_result, tmp_path):
        result, pairs = smoke_result
        test_pairs = pairs[:4]
        ids = [f"pair_{i}" for i in range(4)]
        outputs = export_predictions(result, test_pairs, ids, tmp_path)
        assert len(outputs) == 4
        for region_path, cam_path in outputs:
            masks, _ = ovcd.read_mask_set(region_path)
            assert len(masks) == 1
            assert (masks[0].height, masks[0].width) == (32, 32)
            cam = ovcd.read_feature_map(cam_path)
            assert cam.data.shape == (4, 4, 1)  # input 32 / encoder stride 8

    def test_refinement_contract_is_shared_with_primary(self):
        # the training-time refine step IS the primary's function; pin a
        # golden case so any future reimplementation must stay in contract
        coarse = np.zeros((8, 8), dtype=bool)
        coarse[0:2, 0:2] = True
        inside = np.zeros((8, 8), dtype=bool)
        inside[0:2, 0:4] = True  # overlap 4/8 = 0.5 > 0.05
        outside = np.zeros((8, 8), dtype=bool)
        outside[6:8, 6:8] = True  # overlap 0
        masks = ovcd.MaskSet(
            masks=[ovcd.InstanceMask.from_dense(inside),
                   ovcd.InstanceMask.from_dense(outside)]
        )
        refined = ovcd.refine_pseudo_label(coarse, masks, 0.05)
        assert np.array_equal(refined, inside)
        from ovcd_adapter import s2c

        assert s2c.refine_pseudo_label is ovcd.refine_pseudo_label
