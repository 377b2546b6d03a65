"""Class-agnostic change proposals: mask NMS, bi-temporal change scoring."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FeatureMap, InstanceMask, MaskSet, PairEntry, read_feature_map, read_mask_set
from .errors import ConfigError, ShapeError
from .prototypes import masked_pool


@dataclass
class ProposalConfig:
    nms_iou_threshold: float = 0.8
    # alpha follows prior work's comparator setting, which is not printed
    # anywhere recoverable; 0.0 is our documented default.  Use the
    # `calibrate-alpha` subcommand to sweep it on data with ground truth.
    alpha: float = 0.0
    min_area: int = 32

    def __post_init__(self):
        if not 0.0 < self.nms_iou_threshold <= 1.0:
            raise ConfigError("nms_iou_threshold must be in (0, 1]")
        if not -1.0 - 1e-9 <= self.alpha <= 1.0:
            raise ConfigError("alpha must be in [-1, 1]")
        if self.min_area < 0:
            raise ConfigError("min_area must be >= 0")


@dataclass(eq=False)  # identity equality; holds numpy arrays
class ChangeProposal:
    mask: InstanceMask
    z1: np.ndarray
    z2: np.ndarray
    change_score: float
    source: str  # "t1" or "t2"


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    inter = np.logical_and(a, b).sum()
    union = np.logical_or(a, b).sum()
    return float(inter) / float(union) if union else 0.0


def dedup_masks(m1: MaskSet, m2: MaskSet, config: ProposalConfig) -> MaskSet:
    """Greedy mask-IoU NMS over the union of both temporal mask sets.

    Candidates are ordered by area descending (ties: t1 before t2, then
    original index); a candidate is suppressed when its IoU with any
    already-kept mask exceeds the threshold.
    """
    dims = set()
    for s in (m1, m2):
        dims.update((m.height, m.width) for m in s)
    if len(dims) > 1:
        raise ShapeError(f"mask sets have mixed dimensions: {sorted(dims)}")
    candidates = [(m, 0, i) for i, m in enumerate(m1)] + [
        (m, 1, i) for i, m in enumerate(m2)
    ]
    candidates.sort(key=lambda t: (-t[0].area, t[1], t[2]))
    kept: list[InstanceMask] = []
    kept_dense: list[np.ndarray] = []
    for mask, _, _ in candidates:
        dense = mask.to_dense()
        if any(mask_iou(dense, kd) > config.nms_iou_threshold for kd in kept_dense):
            continue
        kept.append(mask)
        kept_dense.append(dense)
    return MaskSet(masks=kept)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; 0 when either vector has zero norm."""
    if a.shape != b.shape:
        raise ShapeError(f"vector dims differ: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    # clamp away float rounding so similarity stays in [-1, 1]
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def score_change(
    features_t1: FeatureMap,
    features_t2: FeatureMap,
    mask: InstanceMask,
    image_h: int,
    image_w: int,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Pool both temporal features under the mask; score = -cos(z1, z2)."""
    z1 = masked_pool(features_t1, mask, image_h, image_w)
    z2 = masked_pool(features_t2, mask, image_h, image_w)
    return z1, z2, -cosine(z1, z2)


def propose_changes(
    features_t1: FeatureMap,
    features_t2: FeatureMap,
    m1: MaskSet,
    m2: MaskSet,
    config: ProposalConfig,
    image_h: int,
    image_w: int,
) -> list[ChangeProposal]:
    """Dedup, drop small masks, score, keep score > alpha, sort by score desc."""
    sources = {}
    for m in m2:
        sources.setdefault(m.runs, "t2")
    for m in m1:
        sources[m.runs] = "t1"  # t1 wins for masks present in both sets
    deduped = dedup_masks(m1, m2, config)
    proposals = []
    for mask in deduped:
        if mask.area < config.min_area:
            continue
        z1, z2, score = score_change(features_t1, features_t2, mask, image_h, image_w)
        if score > config.alpha:
            proposals.append(
                ChangeProposal(
                    mask=mask,
                    z1=z1,
                    z2=z2,
                    change_score=score,
                    source=sources.get(mask.runs, "t1"),
                )
            )
    proposals.sort(key=lambda p: -p.change_score)
    return proposals


def propose_pair(entry: PairEntry, config: ProposalConfig, image_h: int, image_w: int):
    """Load a manifest pair's files and run proposal generation."""
    f1 = read_feature_map(entry.t1_feature_path)
    f2 = read_feature_map(entry.t2_feature_path)
    m1, _ = read_mask_set(entry.t1_mask_path)
    m2, _ = read_mask_set(entry.t2_mask_path)
    return propose_changes(f1, f2, m1, m2, config, image_h, image_w)
