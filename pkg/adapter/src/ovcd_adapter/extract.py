"""Bi-temporal feature and mask export in the primary package's formats."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ovcd import (
    DatasetManifest,
    FeatureMap,
    InstanceMask,
    MaskSet,
    PairEntry,
    write_feature_map,
    write_manifest,
    write_mask_set,
)

from .errors import AdapterError
from .interfaces import FeatureExtractor, MaskGenerator


def extract_pair(
    image_t1: np.ndarray,
    image_t2: np.ndarray,
    extractor: FeatureExtractor,
    mask_generator: MaskGenerator,
    out_dir,
    pair_id: str,
) -> PairEntry:
    """Run the extractor and segmenter on both temporals and export the files.

    The written files conform to the primary package's readers byte for byte;
    the feature grid is image dims divided by the extractor patch size.
    """
    if np.asarray(image_t1).shape != np.asarray(image_t2).shape:
        raise AdapterError(
            f"temporal images differ in shape: "
            f"{np.asarray(image_t1).shape} vs {np.asarray(image_t2).shape}"
        )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for tag, image in (("t1", image_t1), ("t2", image_t2)):
        features = extractor.extract(image)
        masks = [m for m in mask_generator.generate(image) if m.any()]
        feature_path = out_dir / f"{pair_id}_{tag}.ovft"
        mask_path = out_dir / f"{pair_id}_{tag}_masks.json"
        write_feature_map(FeatureMap(data=features), feature_path)
        write_mask_set(
            MaskSet(masks=[InstanceMask.from_dense(m) for m in masks]), mask_path
        )
        paths[tag] = (feature_path, mask_path)
    return PairEntry(
        id=pair_id,
        t1_feature_path=paths["t1"][0],
        t2_feature_path=paths["t2"][0],
        t1_mask_path=paths["t1"][1],
        t2_mask_path=paths["t2"][1],
    )


def export_pair_manifest(
    entries: list[PairEntry],
    image_height: int,
    image_width: int,
    out_dir,
    classes: list[str] | None = None,
) -> Path:
    """Write a manifest over already-exported pairs."""
    out_dir = Path(out_dir)
    manifest = DatasetManifest(
        pairs=entries,
        image_height=image_height,
        image_width=image_width,
        classes=classes or [],
    )
    path = out_dir / "manifest.json"
    write_manifest(manifest, path)
    return path
