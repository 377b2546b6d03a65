"""Per-category visual prototype bank: masked pooling, clustering, persistence."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    FeatureMap,
    InstanceMask,
    _dump_json,
    _load_json,
    read_feature_map,
    upsample_grid,
    write_feature_map,
)
from .errors import EmptyRegionError, FormatError, MissingClassError, ShapeError


@dataclass
class SupportSample:
    category: int
    features: FeatureMap
    mask: InstanceMask

    def __post_init__(self):
        if self.mask.area == 0:
            raise EmptyRegionError("support sample mask has zero area")


@dataclass
class PrototypeBuildConfig:
    K: int = 5
    seed: int = 0
    max_iters: int = 100
    n_descriptions: int = 20  # provenance only
    images_per_description: int = 5  # provenance only

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class PrototypeSet:
    """Per-category centroid arrays (K_c, dim), keyed by class index."""

    dim: int
    centroids: dict[int, np.ndarray]
    metadata: dict = field(default_factory=dict)

    def classes(self) -> list[int]:
        return sorted(self.centroids)

    def __post_init__(self):
        for c, arr in self.centroids.items():
            if arr.ndim != 2 or arr.shape[1] != self.dim:
                raise ShapeError(f"class {c} centroids have shape {arr.shape}")
            if arr.shape[0] < 1:
                raise ShapeError(f"class {c} has no centroids")
            if not np.isfinite(arr).all():
                raise FormatError(f"class {c} centroids contain non-finite values")


def masked_pool(
    features: FeatureMap, mask: InstanceMask, image_h: int, image_w: int
) -> np.ndarray:
    """Mean feature over the mask's foreground after bilinear upsampling.

    Computed in float64 for a tight match with the per-pixel oracle.
    """
    if (mask.height, mask.width) != (image_h, image_w):
        raise ShapeError(
            f"mask is {mask.height}x{mask.width}, image is {image_h}x{image_w}"
        )
    if mask.area == 0:
        raise EmptyRegionError("cannot pool over a zero-area mask")
    up = upsample_grid(features.data, image_h, image_w)
    fg = mask.to_dense()
    return up[fg].sum(axis=0) / mask.area


def _kmeans_pp_init(
    points: np.ndarray, k: int, rng: np.random.Generator
) -> np.ndarray:
    """k-means++ seeding (D^2 sampling)."""
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = points[first]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            # all remaining points coincide with a centroid
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids[j] = points[idx]
        d2 = np.minimum(d2, ((points - centroids[j]) ** 2).sum(axis=1))
    return centroids


def lloyd_kmeans(
    points: np.ndarray, k: int, seed: int, max_iters: int = 100
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Lloyd's algorithm with k-means++ init.

    Returns (centroids, labels, inertia history).  Deterministic for a
    given (points order, seed).  Empty clusters are repaired by reseeding
    the centroid to the point farthest from its assigned centroid.
    Convergence: assignments stop changing.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    centroids = _kmeans_pp_init(points, k, rng)
    labels = np.full(n, -1, dtype=np.int64)
    history: list[float] = []
    for _ in range(max_iters):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        # repair empty clusters from the worst-assigned points; repairing one
        # cluster can empty another, so sweep until stable
        for _ in range(k):
            empties = [j for j in range(k) if not (new_labels == j).any()]
            if not empties:
                break
            repaired = False
            for j in empties:
                assigned = d2[np.arange(n), new_labels]
                worst = int(assigned.argmax())
                if assigned[worst] == 0.0:
                    break  # every point sits on a centroid; nothing to move
                centroids[j] = points[worst]
                d2[:, j] = ((points - centroids[j]) ** 2).sum(axis=1)
                new_labels = d2.argmin(axis=1)
                repaired = True
            if not repaired:
                break
        history.append(float(d2[np.arange(n), new_labels].sum()))
        if (new_labels == labels).all():
            break
        labels = new_labels
        for j in range(k):
            members = labels == j
            if members.any():
                centroids[j] = points[members].mean(axis=0)
    return centroids, labels, history


def build_prototypes(
    samples: list[SupportSample],
    config: PrototypeBuildConfig,
    image_h: int,
    image_w: int,
    expected_categories: list[int] | None = None,
) -> PrototypeSet:
    """Pool every support sample, then cluster per category.

    K is clamped to the per-class sample count; per-class RNG streams are
    derived from config.seed so class order cannot perturb results.
    """
    by_class: dict[int, list[np.ndarray]] = {}
    dim = None
    for s in samples:
        z = masked_pool(s.features, s.mask, image_h, image_w)
        if dim is None:
            dim = z.size
        elif z.size != dim:
            raise ShapeError(f"mixed feature dims: {dim} vs {z.size}")
        by_class.setdefault(s.category, []).append(z)
    if expected_categories is not None:
        missing = sorted(set(expected_categories) - set(by_class))
        if missing:
            raise MissingClassError(f"no support samples for classes: {missing}")
    if not by_class:
        raise MissingClassError("no support samples at all")

    centroids: dict[int, np.ndarray] = {}
    n_samples: dict[str, int] = {}
    for c in sorted(by_class):
        pts = np.stack(by_class[c])
        k_c = min(config.K, pts.shape[0])
        class_seed = np.random.SeedSequence(config.seed, spawn_key=(c,))
        cents, _, _ = lloyd_kmeans(
            pts, k_c, seed=class_seed.generate_state(1)[0], max_iters=config.max_iters
        )
        # stored as float32, matching the on-disk tensor dtype exactly
        centroids[c] = cents.astype(np.float32).astype(np.float64)
        n_samples[str(c)] = pts.shape[0]
    return PrototypeSet(
        dim=dim,
        centroids=centroids,
        metadata={
            "seed": config.seed,
            "K": config.K,
            "max_iters": config.max_iters,
            "n_descriptions": config.n_descriptions,
            "images_per_description": config.images_per_description,
            "n_samples": n_samples,
        },
    )


def _sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def save_prototypes(protos: PrototypeSet, path) -> None:
    """OVFT tensor of stacked centroids plus a JSON sidecar with row ranges."""
    rows = []
    ranges = []
    start = 0
    for c in protos.classes():
        arr = protos.centroids[c]
        rows.append(arr)
        ranges.append(
            {"index": c, "row_start": start, "row_end": start + arr.shape[0]}
        )
        start += arr.shape[0]
    stacked = np.concatenate(rows, axis=0).astype(np.float32)
    write_feature_map(FeatureMap(data=stacked[:, None, :]), path)
    _dump_json(
        {"dim": protos.dim, "classes": ranges, "metadata": protos.metadata},
        _sidecar_path(path),
    )


def load_prototypes(path, expected_dim: int | None = None) -> PrototypeSet:
    fmap = read_feature_map(path)
    obj = _load_json(_sidecar_path(path))
    for key in ("dim", "classes"):
        if key not in obj:
            raise FormatError(f"{_sidecar_path(path)}: missing field '{key}'")
    dim = obj["dim"]
    if fmap.dim != dim or fmap.width_patches != 1:
        raise FormatError(
            f"{path}: tensor shape {fmap.data.shape} inconsistent with dim {dim}"
        )
    if expected_dim is not None and dim != expected_dim:
        raise FormatError(f"{path}: dim {dim} != expected {expected_dim}")
    stacked = fmap.data[:, 0, :].astype(np.float64)
    centroids = {}
    for r in obj["classes"]:
        rows = stacked[r["row_start"] : r["row_end"]]
        if rows.shape[0] == 0:
            raise FormatError(f"{path}: empty row range for class {r['index']}")
        centroids[int(r["index"])] = rows
    return PrototypeSet(dim=dim, centroids=centroids, metadata=obj.get("metadata", {}))
