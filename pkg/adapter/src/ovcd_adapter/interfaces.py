"""Pluggable model interfaces plus deterministic offline defaults.

Real deployments drop in foundation-model wrappers (a segment-anything mask
generator, a self-supervised ViT feature extractor, a diffusion synthesizer);
the defaults here need no checkpoints and are bit-reproducible, so the whole
export path is testable offline.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import AdapterError

__all__ = [
    "FeatureExtractor",
    "MaskGenerator",
    "ImageSynthesizer",
    "RandomProjectionExtractor",
    "LuminanceMaskGenerator",
    "ProceduralSynthesizer",
    "FolderImageSource",
]


def _as_rgb_float(image: np.ndarray) -> np.ndarray:
    """Validate an (H, W, 3) image and normalize to float64 in [0, 1]."""
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise AdapterError(f"expected an (H, W, 3) image, got shape {arr.shape}")
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    arr = arr.astype(np.float64)
    if not np.isfinite(arr).all():
        raise AdapterError("image contains non-finite values")
    return arr


@runtime_checkable
class FeatureExtractor(Protocol):
    """Dense patch-feature backbone."""

    patch_size: int
    feature_dim: int

    def extract(self, image: np.ndarray) -> np.ndarray:
        """(H, W, 3) image -> (H/patch, W/patch, feature_dim) float32 grid."""
        ...


@runtime_checkable
class MaskGenerator(Protocol):
    """Class-agnostic instance segmenter."""

    def generate(self, image: np.ndarray) -> list[np.ndarray]:
        """(H, W, 3) image -> list of (H, W) boolean instance masks."""
        ...


@runtime_checkable
class ImageSynthesizer(Protocol):
    """Text-conditioned image source (generative model or image folder)."""

    def synthesize(self, description: str, count: int) -> list[np.ndarray]:
        """Return `count` (H, W, 3) uint8 images for one description."""
        ...


@dataclass
class RandomProjectionExtractor:
    """Patch-mean colors pushed through a fixed random projection.

    Deterministic per seed; stands in for a pretrained backbone in tests and
    offline runs while exercising the identical export path.
    """

    patch_size: int = 4
    feature_dim: int = 8
    seed: int = 0
    _projection: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.patch_size < 1 or self.feature_dim < 1:
            raise AdapterError("patch_size and feature_dim must be >= 1")
        rng = np.random.default_rng(self.seed)
        self._projection = rng.standard_normal((3, self.feature_dim)) / np.sqrt(3.0)

    def extract(self, image: np.ndarray) -> np.ndarray:
        arr = _as_rgb_float(image)
        h, w, _ = arr.shape
        p = self.patch_size
        if h % p or w % p:
            raise AdapterError(
                f"image dims {h}x{w} not divisible by patch size {p}"
            )
        patches = arr.reshape(h // p, p, w // p, p, 3).mean(axis=(1, 3))
        return (patches @ self._projection).astype(np.float32)


@dataclass
class LuminanceMaskGenerator:
    """Connected bright regions as instance masks.

    Thresholds the normalized luminance and splits the foreground into
    connected components, largest first.
    """

    threshold: float = 0.5
    min_area: int = 16

    def generate(self, image: np.ndarray) -> list[np.ndarray]:
        arr = _as_rgb_float(image)
        gray = arr.mean(axis=2)
        binary = gray > self.threshold
        labeled, n = ndimage.label(binary)
        masks = [labeled == i for i in range(1, n + 1)]
        masks = [m for m in masks if m.sum() >= self.min_area]
        masks.sort(key=lambda m: -int(m.sum()))
        return masks


def _description_seed(description: str) -> int:
    digest = hashlib.sha256(description.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class ProceduralSynthesizer:
    """Deterministic stand-in for a diffusion model.

    Each description hashes to an RNG stream that paints a bright colored
    block on a dark background, varying position and size per image.
    """

    image_size: int = 64

    def synthesize(self, description: str, count: int) -> list[np.ndarray]:
        if count < 1:
            raise AdapterError("count must be >= 1")
        rng = np.random.default_rng(_description_seed(description))
        s = self.image_size
        color = rng.integers(160, 256, size=3)
        images = []
        for _ in range(count):
            img = np.full((s, s, 3), 24, dtype=np.uint8)
            side = int(rng.integers(s // 4, s // 2))
            y0 = int(rng.integers(0, s - side))
            x0 = int(rng.integers(0, s - side))
            img[y0 : y0 + side, x0 : x0 + side] = color
            images.append(img)
        return images


@dataclass
class FolderImageSource:
    """Offline mode: serve images from a local folder instead of synthesizing.

    Files are consumed in sorted order, cycling, starting at an offset
    derived from the description so different descriptions see different
    (but reproducible) slices of the folder.
    """

    folder: Path
    _files: list[Path] = field(init=False, repr=False)

    def __post_init__(self):
        self.folder = Path(self.folder)
        exts = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}
        self._files = sorted(
            p for p in self.folder.iterdir() if p.suffix.lower() in exts
        )
        if not self._files:
            raise AdapterError(f"no images found in {self.folder}")

    def synthesize(self, description: str, count: int) -> list[np.ndarray]:
        start = _description_seed(description) % len(self._files)
        out = []
        for i in range(count):
            path = self._files[(start + i) % len(self._files)]
            with Image.open(path) as im:
                out.append(np.asarray(im.convert("RGB")))
        return out
