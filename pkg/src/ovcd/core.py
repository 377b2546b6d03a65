"""Core data types, file formats, and interpolation.

File formats (all little-endian, all deterministic byte-for-byte):

* OVFT tensor: magic ``OVFT``, uint32 version, three uint32 dims
  ``(h, w, d)``, then ``h*w*d`` float32 values in row-major ``[h][w][d]``
  layout.
* Mask sidecar: JSON ``{"height": H, "width": W, "instances":
  [{"runs": [...], "score": <optional>}]}``.  Runs are alternating
  background/foreground run lengths over row-major pixel order, starting
  with background.
* Label raster: JSON ``{"height": H, "width": W, "classes":
  {"<label>": runs, ...}}`` where each value is the RLE of the binary
  mask ``raster == label``.
* Dataset manifest: JSON listing bi-temporal pairs with feature/mask
  paths (relative to the manifest file), optional ground-truth paths,
  an optional support-sample list, and the class vocabulary.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, ShapeError

OVFT_MAGIC = b"OVFT"
OVFT_VERSION = 1


# ---------------------------------------------------------------------------
# domain types


@dataclass
class FeatureMap:
    """Dense patch-feature grid of shape (height_patches, width_patches, dim)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 3:
            raise ShapeError(f"feature map must be 3-d, got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ShapeError(f"feature map dims must be >= 1, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise FormatError("feature map contains non-finite values")
        self.data = arr

    @property
    def height_patches(self) -> int:
        return self.data.shape[0]

    @property
    def width_patches(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[2]


def encode_runs(dense: np.ndarray) -> list[int]:
    """RLE-encode a binary grid: alternating bg/fg runs, row-major, bg first."""
    flat = np.asarray(dense).astype(bool).ravel()
    if flat.size == 0:
        return []
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs = [0] + runs
    return runs


def decode_runs(runs: list[int], height: int, width: int) -> np.ndarray:
    """Inverse of :func:`encode_runs`; validates the run sum."""
    total = sum(runs)
    if total != height * width:
        raise FormatError(
            f"run sum {total} does not match {height}x{width} pixel count"
        )
    flat = np.zeros(height * width, dtype=bool)
    pos = 0
    fg = False
    for r in runs:
        if fg:
            flat[pos : pos + r] = True
        pos += r
        fg = not fg
    return flat.reshape(height, width)


@dataclass(frozen=True)
class InstanceMask:
    """Binary pixel mask stored as RLE runs over row-major order."""

    height: int
    width: int
    runs: tuple[int, ...]

    def __post_init__(self):
        if sum(self.runs) != self.height * self.width:
            raise FormatError(
                f"run sum {sum(self.runs)} != {self.height}x{self.width}"
            )

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "InstanceMask":
        dense = np.asarray(dense)
        h, w = dense.shape
        return cls(height=h, width=w, runs=tuple(encode_runs(dense)))

    def to_dense(self) -> np.ndarray:
        return decode_runs(list(self.runs), self.height, self.width)

    @property
    def area(self) -> int:
        return int(sum(self.runs[1::2]))


@dataclass
class MaskSet:
    """Ordered list of instance masks sharing one (height, width)."""

    masks: list[InstanceMask]

    def __post_init__(self):
        dims = {(m.height, m.width) for m in self.masks}
        if len(dims) > 1:
            raise ShapeError(f"masks have mixed dimensions: {sorted(dims)}")

    def __len__(self) -> int:
        return len(self.masks)

    def __iter__(self):
        return iter(self.masks)

    def __getitem__(self, i):
        return self.masks[i]


@dataclass(frozen=True)
class CategoryVocabulary:
    """Ordered class names; index 0 is reserved for background/no-change."""

    classes: tuple[str, ...]

    def __post_init__(self):
        if not self.classes:
            raise ValueError("vocabulary must not be empty")
        if any(not c for c in self.classes):
            raise ValueError("class names must be non-empty")
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("class names must be unique")

    def __len__(self) -> int:
        return len(self.classes)

    def index_of(self, name: str) -> int:
        return self.classes.index(name)


@dataclass
class PairEntry:
    id: str
    t1_feature_path: Path
    t2_feature_path: Path
    t1_mask_path: Path
    t2_mask_path: Path
    gt_change_path: Path | None = None
    gt_semantic_t1_path: Path | None = None
    gt_semantic_t2_path: Path | None = None


@dataclass
class SupportEntry:
    category: int
    feature_path: Path
    mask_path: Path


@dataclass
class DatasetManifest:
    pairs: list[PairEntry]
    image_height: int
    image_width: int
    classes: list[str] = field(default_factory=list)
    support: list[SupportEntry] = field(default_factory=list)

    def vocabulary(self) -> CategoryVocabulary:
        return CategoryVocabulary(tuple(self.classes))


# ---------------------------------------------------------------------------
# OVFT tensor i/o


def write_feature_map(fmap: FeatureMap, destination) -> None:
    """Write an OVFT tensor file; read-back is bit-exact."""
    h, w, d = fmap.data.shape
    payload = fmap.data.astype("<f4").tobytes()
    try:
        with open(destination, "wb") as f:
            f.write(OVFT_MAGIC)
            f.write(struct.pack("<I", OVFT_VERSION))
            f.write(struct.pack("<III", h, w, d))
            f.write(payload)
    except OSError as e:
        raise DataError(f"cannot write {destination}: {e}") from e


def read_feature_map(source) -> FeatureMap:
    """Inverse of :func:`write_feature_map`."""
    try:
        with open(source, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise DataError(f"cannot read {source}: {e}") from e
    if len(raw) < 20:
        raise FormatError(f"{source}: truncated header")
    if raw[:4] != OVFT_MAGIC:
        raise FormatError(f"{source}: bad magic {raw[:4]!r}")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != OVFT_VERSION:
        raise FormatError(f"{source}: unsupported version {version}")
    h, w, d = struct.unpack_from("<III", raw, 8)
    if min(h, w, d) < 1:
        raise FormatError(f"{source}: bad dims ({h}, {w}, {d})")
    expected = h * w * d * 4
    payload = raw[20:]
    if len(payload) != expected:
        raise FormatError(
            f"{source}: truncated payload ({len(payload)} of {expected} bytes)"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(h, w, d)
    if not np.isfinite(data).all():
        raise FormatError(f"{source}: non-finite values in payload")
    return FeatureMap(data=data.copy())


# ---------------------------------------------------------------------------
# JSON sidecar i/o


def _dump_json(obj, path) -> None:
    try:
        with open(path, "w") as f:
            json.dump(obj, f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise DataError(f"cannot write {path}: {e}") from e


def _load_json(path):
    try:
        with open(path) as f:
            return json.load(f)
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: invalid JSON: {e}") from e


def write_mask_set(masks: MaskSet, path, scores: list[float] | None = None) -> None:
    if scores is not None and len(scores) != len(masks):
        raise ShapeError("scores length must match mask count")
    if len(masks) == 0:
        raise FormatError("cannot write an empty mask set without dimensions")
    instances = []
    for i, m in enumerate(masks):
        inst = {"runs": list(m.runs)}
        if scores is not None:
            inst["score"] = float(scores[i])
        instances.append(inst)
    _dump_json(
        {"height": masks[0].height, "width": masks[0].width, "instances": instances},
        path,
    )


def read_mask_set(path) -> tuple[MaskSet, list[float | None]]:
    obj = _load_json(path)
    for key in ("height", "width", "instances"):
        if key not in obj:
            raise FormatError(f"{path}: missing field '{key}'")
    h, w = obj["height"], obj["width"]
    masks, scores = [], []
    for inst in obj["instances"]:
        if "runs" not in inst:
            raise FormatError(f"{path}: instance missing 'runs'")
        try:
            masks.append(InstanceMask(height=h, width=w, runs=tuple(inst["runs"])))
        except FormatError as e:
            raise FormatError(f"{path}: {e}") from e
        scores.append(inst.get("score"))
    return MaskSet(masks=masks), scores


def write_label_raster(raster: np.ndarray, path) -> None:
    """Persist an integer label raster as RLE-per-class JSON (label 0 implicit)."""
    raster = np.asarray(raster)
    h, w = raster.shape
    classes = {}
    for label in np.unique(raster):
        if label == 0:
            continue
        classes[str(int(label))] = encode_runs(raster == label)
    _dump_json({"height": h, "width": w, "classes": classes}, path)


def read_label_raster(path) -> np.ndarray:
    obj = _load_json(path)
    for key in ("height", "width", "classes"):
        if key not in obj:
            raise FormatError(f"{path}: missing field '{key}'")
    h, w = obj["height"], obj["width"]
    raster = np.zeros((h, w), dtype=np.int64)
    for label_str, runs in obj["classes"].items():
        label = int(label_str)
        mask = decode_runs(runs, h, w)
        raster[mask] = label
    return raster


# ---------------------------------------------------------------------------
# manifest i/o


def _opt_path(base: Path, value) -> Path | None:
    return None if value is None else base / value


def write_manifest(manifest: DatasetManifest, path) -> None:
    base = Path(path).parent

    def rel(p: Path | None):
        return None if p is None else str(Path(p).relative_to(base))

    pairs = []
    for e in manifest.pairs:
        entry = {
            "id": e.id,
            "t1_feature_path": rel(e.t1_feature_path),
            "t2_feature_path": rel(e.t2_feature_path),
            "t1_mask_path": rel(e.t1_mask_path),
            "t2_mask_path": rel(e.t2_mask_path),
        }
        if e.gt_change_path is not None:
            entry["gt_change_path"] = rel(e.gt_change_path)
        if e.gt_semantic_t1_path is not None:
            entry["gt_semantic_t1_path"] = rel(e.gt_semantic_t1_path)
        if e.gt_semantic_t2_path is not None:
            entry["gt_semantic_t2_path"] = rel(e.gt_semantic_t2_path)
        pairs.append(entry)
    obj = {
        "image_height": manifest.image_height,
        "image_width": manifest.image_width,
        "classes": list(manifest.classes),
        "pairs": pairs,
        "support": [
            {
                "category": s.category,
                "feature_path": rel(s.feature_path),
                "mask_path": rel(s.mask_path),
            }
            for s in manifest.support
        ],
    }
    _dump_json(obj, path)


def read_manifest(path) -> DatasetManifest:
    obj = _load_json(path)
    base = Path(path).parent
    for key in ("image_height", "image_width", "pairs"):
        if key not in obj:
            raise FormatError(f"{path}: missing field '{key}'")
    pairs = []
    for p in obj["pairs"]:
        pairs.append(
            PairEntry(
                id=p["id"],
                t1_feature_path=base / p["t1_feature_path"],
                t2_feature_path=base / p["t2_feature_path"],
                t1_mask_path=base / p["t1_mask_path"],
                t2_mask_path=base / p["t2_mask_path"],
                gt_change_path=_opt_path(base, p.get("gt_change_path")),
                gt_semantic_t1_path=_opt_path(base, p.get("gt_semantic_t1_path")),
                gt_semantic_t2_path=_opt_path(base, p.get("gt_semantic_t2_path")),
            )
        )
    support = [
        SupportEntry(
            category=s["category"],
            feature_path=base / s["feature_path"],
            mask_path=base / s["mask_path"],
        )
        for s in obj.get("support", [])
    ]
    manifest = DatasetManifest(
        pairs=pairs,
        image_height=obj["image_height"],
        image_width=obj["image_width"],
        classes=list(obj.get("classes", [])),
        support=support,
    )
    for e in pairs:
        for p in (
            e.t1_feature_path,
            e.t2_feature_path,
            e.t1_mask_path,
            e.t2_mask_path,
            e.gt_change_path,
            e.gt_semantic_t1_path,
            e.gt_semantic_t2_path,
        ):
            if p is not None and not Path(p).exists():
                raise DataError(f"{path}: referenced file does not exist: {p}")
    for s in support:
        for p in (s.feature_path, s.mask_path):
            if not Path(p).exists():
                raise DataError(f"{path}: referenced file does not exist: {p}")
    return manifest


# ---------------------------------------------------------------------------
# bilinear interpolation


def _axis_coords(n_out: int, n_in: int):
    """Corner-aligned source coordinates: lower index, upper index, fraction."""
    if n_out == 1 or n_in == 1:
        zeros = np.zeros(n_out, dtype=np.int64)
        return zeros, zeros, np.zeros(n_out)
    src = np.linspace(0.0, n_in - 1.0, n_out)
    lo = np.minimum(np.floor(src).astype(np.int64), n_in - 2)
    return lo, lo + 1, src - lo


def upsample_grid(data: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Corner-aligned bilinear resample of an (h, w, ...) array, in float64."""
    if target_h < 1 or target_w < 1:
        raise ShapeError(f"target dims must be >= 1, got ({target_h}, {target_w})")
    d = np.asarray(data, dtype=np.float64)
    y0, y1, ty = _axis_coords(target_h, d.shape[0])
    x0, x1, tx = _axis_coords(target_w, d.shape[1])
    extra = (1,) * (d.ndim - 2)
    ty = ty.reshape(-1, 1, *extra)
    tx = tx.reshape(1, -1, *extra)
    a = d[np.ix_(y0, x0)]
    b = d[np.ix_(y0, x1)]
    c = d[np.ix_(y1, x0)]
    e = d[np.ix_(y1, x1)]
    top = a + tx * (b - a)
    bot = c + tx * (e - c)
    return top + ty * (bot - top)


def upsample_bilinear(fmap: FeatureMap, target_h: int, target_w: int) -> FeatureMap:
    """Per-channel corner-aligned bilinear upsampling to (target_h, target_w)."""
    return FeatureMap(data=upsample_grid(fmap.data, target_h, target_w))
