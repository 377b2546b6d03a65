"""Deterministic synthetic dataset generator.

Produces a complete on-disk dataset (manifest, OVFT feature files, mask
sidecars, ground-truth change instances and semantic label rasters, and
per-class support samples) so the whole engine can be exercised without
any foundation model.

Construction: the patch grid is split into 2x2 blocks.  Three blocks host
rectangular land-cover regions whose patch features point along a
class-specific unit direction (plus Gaussian jitter scaled by
``cluster_spread``); the fourth hosts a distractor mask over background.
Instance masks are shrunk inside their block so every mask pixel
interpolates only among patches of that block, which makes masked pooling
exact when ``cluster_spread`` is 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    DatasetManifest,
    FeatureMap,
    InstanceMask,
    MaskSet,
    PairEntry,
    SupportEntry,
    write_feature_map,
    write_label_raster,
    write_manifest,
    write_mask_set,
)
from .errors import ConfigError

PATCH_SIZE = 4


@dataclass
class SynthConfig:
    n_classes: int = 3
    n_pairs: int = 4
    image_size: int = 64
    dim: int = 8
    cluster_spread: float = 0.0
    support_per_class: int = 6

    def validate(self):
        if self.n_classes < 2:
            raise ConfigError("n_classes must be >= 2 (class-to-class changes)")
        if self.dim < self.n_classes + 1:
            raise ConfigError(
                f"dim must be >= n_classes + 1 ({self.n_classes + 1}) for "
                "orthogonal class directions"
            )
        if self.image_size % (2 * PATCH_SIZE) != 0 or self.image_size < 32:
            raise ConfigError(
                f"image_size must be a multiple of {2 * PATCH_SIZE} and >= 32"
            )
        if self.n_pairs < 1:
            raise ConfigError("n_pairs must be >= 1")
        if self.cluster_spread < 0:
            raise ConfigError("cluster_spread must be >= 0")


def _class_directions(n_classes: int, dim: int) -> np.ndarray:
    """Unit direction per label 0..n_classes; orthonormal basis vectors."""
    dirs = np.zeros((n_classes + 1, dim), dtype=np.float32)
    for c in range(n_classes + 1):
        dirs[c, c] = 1.0
    return dirs


def _safe_pixel_span(p0: int, p1: int, grid: int, size: int) -> tuple[int, int]:
    """Pixel rows whose bilinear sources lie strictly inside patches [p0, p1).

    Shrunk by one extra pixel at each end to stay clear of float rounding
    at patch boundaries.
    """
    scale = (size - 1) / (grid - 1)
    lo = math.ceil(p0 * scale) + 1
    hi = math.floor((p1 - 1) * scale) - 1
    return lo, hi + 1


def _block_mask(block_r: int, block_c: int, grid: int, size: int) -> np.ndarray:
    half = grid // 2
    r0, r1 = block_r * half, (block_r + 1) * half
    c0, c1 = block_c * half, (block_c + 1) * half
    y0, y1 = _safe_pixel_span(r0, r1, grid, size)
    x0, x1 = _safe_pixel_span(c0, c1, grid, size)
    dense = np.zeros((size, size), dtype=bool)
    dense[y0:y1, x0:x1] = True
    return dense


def _paint_block(
    grid_data: np.ndarray,
    block_r: int,
    block_c: int,
    direction: np.ndarray,
    spread: float,
    rng: np.random.Generator,
):
    half = grid_data.shape[0] // 2
    r0, c0 = block_r * half, block_c * half
    patch = np.broadcast_to(direction, (half, half, direction.size)).copy()
    if spread > 0:
        patch += spread * rng.standard_normal(patch.shape)
    grid_data[r0 : r0 + half, c0 : c0 + half] = patch


def synth_generate(seed: int, config: SynthConfig, out_dir) -> Path:
    """Generate a synthetic dataset; returns the manifest path.

    Pure function of (seed, config): same inputs yield byte-identical
    output trees.
    """
    config.validate()
    out_dir = Path(out_dir)
    (out_dir / "pairs").mkdir(parents=True, exist_ok=True)
    (out_dir / "support").mkdir(parents=True, exist_ok=True)

    size = config.image_size
    grid = size // PATCH_SIZE
    dirs = _class_directions(config.n_classes, config.dim)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    spread = config.cluster_spread

    region_blocks = [(0, 0), (0, 1), (1, 0)]
    distractor_block = (1, 1)
    region_masks = [_block_mask(r, c, grid, size) for r, c in region_blocks]
    distractor_mask = _block_mask(*distractor_block, grid, size)

    change_cycle = 0  # cycles class pairs so every class appears in GT
    pairs = []
    for pair_idx in range(config.n_pairs):
        pid = f"pair_{pair_idx:04d}"
        # region i -> (class at t1, class at t2); region 0 always changes
        assignments = []
        for i in range(len(region_blocks)):
            changed = i == 0 or rng.random() < 0.5
            if changed:
                c1 = 1 + change_cycle % config.n_classes
                c2 = 1 + (change_cycle + 1) % config.n_classes
                change_cycle += 1
            else:
                c1 = c2 = int(rng.integers(1, config.n_classes + 1))
            assignments.append((c1, c2))

        feats = {}
        for t, which in ((1, 0), (2, 1)):
            data = np.broadcast_to(dirs[0], (grid, grid, config.dim)).copy()
            if spread > 0:
                data += spread * rng.standard_normal(data.shape).astype(np.float32)
            for (br, bc), (c1, c2) in zip(region_blocks, assignments):
                label = (c1, c2)[which]
                _paint_block(data, br, bc, dirs[label], spread, rng)
            feats[t] = FeatureMap(data=data.astype(np.float32))

        masks = MaskSet(
            masks=[InstanceMask.from_dense(m) for m in region_masks]
            + [InstanceMask.from_dense(distractor_mask)]
        )

        gt_instances = []
        sem1 = np.zeros((size, size), dtype=np.int64)
        sem2 = np.zeros((size, size), dtype=np.int64)
        for m, (c1, c2) in zip(region_masks, assignments):
            if c1 != c2:
                gt_instances.append(InstanceMask.from_dense(m))
                sem1[m] = c1
                sem2[m] = c2

        base = out_dir / "pairs"
        entry = PairEntry(
            id=pid,
            t1_feature_path=base / f"{pid}_t1.ovft",
            t2_feature_path=base / f"{pid}_t2.ovft",
            t1_mask_path=base / f"{pid}_t1_masks.json",
            t2_mask_path=base / f"{pid}_t2_masks.json",
            gt_change_path=base / f"{pid}_gt_change.json",
            gt_semantic_t1_path=base / f"{pid}_gt_sem_t1.json",
            gt_semantic_t2_path=base / f"{pid}_gt_sem_t2.json",
        )
        write_feature_map(feats[1], entry.t1_feature_path)
        write_feature_map(feats[2], entry.t2_feature_path)
        write_mask_set(masks, entry.t1_mask_path)
        write_mask_set(masks, entry.t2_mask_path)
        write_mask_set(MaskSet(masks=gt_instances), entry.gt_change_path)
        write_label_raster(sem1, entry.gt_semantic_t1_path)
        write_label_raster(sem2, entry.gt_semantic_t2_path)
        pairs.append(entry)

    support = []
    full_mask = InstanceMask.from_dense(np.ones((size, size), dtype=bool))
    mask_path = out_dir / "support" / "full_mask.json"
    write_mask_set(MaskSet(masks=[full_mask]), mask_path)
    for c in range(1, config.n_classes + 1):
        for i in range(config.support_per_class):
            data = np.broadcast_to(dirs[c], (grid, grid, config.dim)).copy()
            if spread > 0:
                data += spread * rng.standard_normal(data.shape).astype(np.float32)
            path = out_dir / "support" / f"class_{c}_sample_{i:03d}.ovft"
            write_feature_map(FeatureMap(data=data.astype(np.float32)), path)
            support.append(
                SupportEntry(category=c, feature_path=path, mask_path=mask_path)
            )

    classes = ["background"] + [f"class_{c}" for c in range(1, config.n_classes + 1)]
    manifest = DatasetManifest(
        pairs=pairs,
        image_height=size,
        image_width=size,
        classes=classes,
        support=support,
    )
    manifest_path = out_dir / "manifest.json"
    write_manifest(manifest, manifest_path)
    return manifest_path
