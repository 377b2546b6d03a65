"""Mask arithmetic for weak supervision: CAM binarization, pseudo-label
refinement, and inference-time proposal filtering against a predicted
change region.  All thresholds are strict (r > gamma excludes r == gamma)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import InstanceMask, MaskSet, upsample_grid
from .errors import ConfigError, EmptyRegionError, ShapeError
from .proposals import ChangeProposal


@dataclass
class CamMap:
    """Real-valued activation grid at feature resolution."""

    data: np.ndarray
    image_height: int
    image_width: int

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ShapeError(f"cam must be 2-d, got shape {self.data.shape}")
        if not np.isfinite(self.data).all():
            raise ValueError("cam contains non-finite values")


@dataclass
class FusionConfig:
    beta: float = 0.5
    gamma1: float = 0.05
    gamma2: float = 0.05

    def __post_init__(self):
        for name in ("beta", "gamma1", "gamma2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")


def binarize_cam(cam: CamMap, beta: float) -> np.ndarray:
    """Upsample, min-max normalize, threshold at beta (>= beta -> 1).

    A constant cam has no evidence of change and maps to all zeros.
    """
    up = upsample_grid(cam.data, cam.image_height, cam.image_width)
    lo, hi = up.min(), up.max()
    if hi == lo:
        return np.zeros_like(up, dtype=bool)
    return (up - lo) / (hi - lo) >= beta


def overlap_ratio(m: InstanceMask, y: np.ndarray) -> float:
    """|m intersect y| / |m|, by integer pixel counts."""
    if (m.height, m.width) != y.shape:
        raise ShapeError(f"mask is {m.height}x{m.width}, raster is {y.shape}")
    if m.area == 0:
        raise EmptyRegionError("overlap ratio undefined for a zero-area mask")
    inter = int(np.logical_and(m.to_dense(), y).sum())
    return inter / m.area


def refine_pseudo_label(
    coarse: np.ndarray, proposals: MaskSet, gamma1: float
) -> np.ndarray:
    """Union of proposals whose overlap ratio with the coarse label exceeds gamma1.

    The coarse label itself contributes no pixels; the refined label is
    built purely from the kept proposals.
    """
    refined = np.zeros_like(np.asarray(coarse), dtype=bool)
    for m in proposals:
        if overlap_ratio(m, coarse) > gamma1:
            refined |= m.to_dense()
    return refined


def fuse_inference(
    proposals: list[ChangeProposal], region: np.ndarray, gamma2: float
) -> list[ChangeProposal]:
    """Keep proposals sufficiently covered by the predicted change region."""
    return [p for p in proposals if overlap_ratio(p.mask, region) > gamma2]
