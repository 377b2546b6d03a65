"""End-to-end orchestration: propose -> retrieve (-> fuse) -> evaluate.

Pairs are processed by a bounded worker pool and merged by pair id, so
results are byte-identical regardless of scheduling or worker count.
"""

from __future__ import annotations

import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    DatasetManifest,
    PairEntry,
    _dump_json,
    read_feature_map,
    read_manifest,
    read_mask_set,
    write_label_raster,
    write_mask_set,
    read_label_raster,
)
from .core import MaskSet
from .errors import ConfigError, DataError, OvcdError
from .evaluation import (
    ConfusionAccumulator,
    EvalReport,
    finalize,
    oracle_change_proposal,
    oracle_identification,
)
from .fusion import FusionConfig, fuse_inference
from .prototypes import (
    PrototypeBuildConfig,
    PrototypeSet,
    SupportSample,
    build_prototypes,
    load_prototypes,
    read_feature_map as _read_fm,
)
from .proposals import ProposalConfig, propose_pair
from .retrieval import (
    RetrievalConfig,
    SemanticChangeMap,
    assign_categories,
    rasterize,
)

ENV_OVERRIDES = {
    "OVCD_MANIFEST": "manifest",
    "OVCD_PROTOTYPES": "prototypes",
    "OVCD_OUTPUT_DIR": "output_dir",
}


@dataclass
class PipelineConfig:
    manifest: str
    output_dir: str
    prototypes: str | None = None
    proposal: ProposalConfig = field(default_factory=ProposalConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    change_region_dir: str | None = None
    mode: str = "standard"
    seed: int = 0
    jobs: int = 0  # 0 -> available parallelism

    def __post_init__(self):
        if self.mode not in ("standard", "oracle_identification", "oracle_change_proposal"):
            raise ConfigError(f"mode: unknown mode '{self.mode}'")
        if self.jobs < 0:
            raise ConfigError("jobs must be >= 0")

    def effective_jobs(self) -> int:
        return self.jobs if self.jobs > 0 else (os.cpu_count() or 1)


def load_pipeline_config(path, overrides: dict | None = None) -> PipelineConfig:
    try:
        with open(path) as f:
            obj = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path}: invalid JSON: {e}") from e
    for env, key in ENV_OVERRIDES.items():
        if env in os.environ:
            obj[key] = os.environ[env]
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in ("alpha", "nms_iou_threshold", "min_area"):
            obj.setdefault("proposal", {})[key] = value
        elif key in ("strategy", "discard_same_class"):
            obj.setdefault("retrieval", {})[key] = value
        elif key in ("beta", "gamma1", "gamma2"):
            obj.setdefault("fusion", {})[key] = value
        else:
            obj[key] = value
    for required in ("manifest", "output_dir"):
        if required not in obj:
            raise ConfigError(f"config {path}: missing field '{required}'")
    try:
        return PipelineConfig(
            manifest=obj["manifest"],
            output_dir=obj["output_dir"],
            prototypes=obj.get("prototypes"),
            proposal=ProposalConfig(**obj.get("proposal", {})),
            retrieval=RetrievalConfig(**obj.get("retrieval", {})),
            fusion=FusionConfig(**obj.get("fusion", {})),
            change_region_dir=obj.get("change_region_dir"),
            mode=obj.get("mode", "standard"),
            seed=obj.get("seed", 0),
            jobs=obj.get("jobs", 0),
        )
    except TypeError as e:
        raise ConfigError(f"config {path}: {e}") from e


def build_bank_from_manifest(
    manifest: DatasetManifest, config: PrototypeBuildConfig
) -> PrototypeSet:
    samples = []
    for s in manifest.support:
        fmap = _read_fm(s.feature_path)
        masks, _ = read_mask_set(s.mask_path)
        samples.append(
            SupportSample(category=s.category, features=fmap, mask=masks[0])
        )
    expected = list(range(1, len(manifest.classes))) if manifest.classes else None
    return build_prototypes(
        samples,
        config,
        manifest.image_height,
        manifest.image_width,
        expected_categories=expected,
    )


def _load_change_region(cfg: PipelineConfig, pair_id: str, shape) -> np.ndarray:
    path = Path(cfg.change_region_dir) / f"{pair_id}_region.json"
    if not path.exists():
        raise DataError(f"pair {pair_id}: missing change region {path}")
    masks, _ = read_mask_set(path)
    region = np.zeros(shape, dtype=bool)
    for m in masks:
        region |= m.to_dense()
    return region


def _process_pair(
    entry: PairEntry,
    manifest: DatasetManifest,
    cfg: PipelineConfig,
    bank: PrototypeSet | None,
    out_dir: Path,
) -> dict:
    h, w = manifest.image_height, manifest.image_width
    try:
        if cfg.mode == "oracle_change_proposal":
            if entry.gt_change_path is None:
                raise DataError("oracle_change_proposal needs gt_change_path")
            if bank is None:
                raise ConfigError("oracle_change_proposal needs a prototype bank")
            gt_change, _ = read_mask_set(entry.gt_change_path)
            f1 = read_feature_map(entry.t1_feature_path)
            f2 = read_feature_map(entry.t2_feature_path)
            pred = oracle_change_proposal(
                gt_change, f1, f2, bank, cfg.retrieval, h, w
            )
            proposals = []
        else:
            proposals = propose_pair(entry, cfg.proposal, h, w)
            if cfg.change_region_dir is not None:
                region = _load_change_region(cfg, entry.id, (h, w))
                proposals = fuse_inference(proposals, region, cfg.fusion.gamma2)
            if cfg.mode == "oracle_identification":
                if entry.gt_semantic_t1_path is None or entry.gt_semantic_t2_path is None:
                    raise DataError("oracle_identification needs semantic ground truth")
                gt1 = read_label_raster(entry.gt_semantic_t1_path)
                gt2 = read_label_raster(entry.gt_semantic_t2_path)
                pred = oracle_identification(
                    MaskSet(masks=[p.mask for p in proposals]), gt1, gt2
                )
            else:
                if bank is None:
                    raise ConfigError("standard mode needs a prototype bank")
                assignments = assign_categories(proposals, bank, cfg.retrieval)
                pred = rasterize(assignments, proposals, h, w)
    except OvcdError as e:
        raise type(e)(f"pair {entry.id}: {e}") from e

    if proposals:
        write_mask_set(
            MaskSet(masks=[p.mask for p in proposals]),
            out_dir / f"{entry.id}_proposals.json",
            scores=[p.change_score for p in proposals],
        )
    write_label_raster(pred.t1, out_dir / f"{entry.id}_pred_t1.json")
    write_label_raster(pred.t2, out_dir / f"{entry.id}_pred_t2.json")
    return {"id": entry.id, "pred": pred, "entry": entry}


def accumulate_pair(
    acc_sem: ConfusionAccumulator | None,
    acc_bin: ConfusionAccumulator,
    pred: SemanticChangeMap,
    entry: PairEntry,
) -> None:
    if (
        acc_sem is not None
        and entry.gt_semantic_t1_path is not None
        and entry.gt_semantic_t2_path is not None
    ):
        gt1 = read_label_raster(entry.gt_semantic_t1_path)
        gt2 = read_label_raster(entry.gt_semantic_t2_path)
        acc_sem.add_semantic(pred, gt1, gt2)
    if entry.gt_change_path is not None:
        gt_change, _ = read_mask_set(entry.gt_change_path)
        gt_bin = np.zeros((pred.t1.shape), dtype=bool)
        for m in gt_change:
            gt_bin |= m.to_dense()
        acc_bin.add_binary(pred.t1 != 0, gt_bin)


def run_pipeline(cfg: PipelineConfig) -> EvalReport:
    """Run all stages over the manifest; returns the final report."""
    manifest = read_manifest(cfg.manifest)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    bank = None
    if cfg.prototypes is not None:
        if not Path(cfg.prototypes).exists():
            raise ConfigError(f"prototypes: file does not exist: {cfg.prototypes}")
        bank = load_prototypes(cfg.prototypes)

    t0 = time.monotonic()
    with ThreadPoolExecutor(max_workers=cfg.effective_jobs()) as pool:
        futures = {
            e.id: pool.submit(_process_pair, e, manifest, cfg, bank, out_dir)
            for e in manifest.pairs
        }
        results = [futures[pid].result() for pid in sorted(futures)]
    print(
        f"processed {len(results)} pairs in {time.monotonic() - t0:.2f}s",
        file=sys.stderr,
    )

    n_vocab = len(manifest.classes)
    acc_sem = ConfusionAccumulator(n_classes=n_vocab) if n_vocab > 1 else None
    acc_bin = ConfusionAccumulator(n_classes=2)
    any_sem = False
    any_gt = False
    for r in results:
        entry = r["entry"]
        if entry.gt_semantic_t1_path is not None and acc_sem is not None:
            any_sem = True
        if entry.gt_change_path is not None:
            any_gt = True
        accumulate_pair(acc_sem, acc_bin, r["pred"], entry)

    if any_sem:
        report = finalize(acc_sem, mode=cfg.mode, class_names=manifest.classes)
    elif any_gt:
        report = finalize(acc_bin, mode=cfg.mode, class_names=["background", "change"])
    else:
        report = EvalReport(per_class={}, miou=0.0, mf1=0.0, mode=cfg.mode)

    _dump_json(report.to_dict(), out_dir / "report.json")
    with open(out_dir / "report.txt", "w") as f:
        f.write(report.format_table() + "\n")
    return report
