"""Command-line interface for the change-detection retrieval engine.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .core import (
    MaskSet,
    InstanceMask,
    read_feature_map,
    read_manifest,
    read_mask_set,
    write_label_raster,
    write_mask_set,
    _dump_json,
)
from .errors import ConfigError, OvcdError
from .evaluation import ConfusionAccumulator, finalize
from .fusion import CamMap, binarize_cam, refine_pseudo_label
from .pipeline import (
    PipelineConfig,
    build_bank_from_manifest,
    load_pipeline_config,
    run_pipeline,
)
from .prototypes import PrototypeBuildConfig, save_prototypes
from .proposals import ProposalConfig, propose_pair
from .retrieval import RetrievalConfig
from .synth import SynthConfig, synth_generate

STRATEGY_FLAGS = {"mean": "category_mean", "max": "global_max"}
MODE_FLAGS = {
    "standard": "standard",
    "oracle-id": "oracle_identification",
    "oracle-proposal": "oracle_change_proposal",
}


def _add_synth(sub):
    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-classes", type=int, default=3)
    p.add_argument("--n-pairs", type=int, default=4)
    p.add_argument("--image-size", type=int, default=64)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--cluster-spread", type=float, default=0.0)


def _cmd_synth(args):
    cfg = SynthConfig(
        n_classes=args.n_classes,
        n_pairs=args.n_pairs,
        image_size=args.image_size,
        dim=args.dim,
        cluster_spread=args.cluster_spread,
    )
    path = synth_generate(args.seed, cfg, args.out)
    print(path)


def _add_build_prototypes(sub):
    p = sub.add_parser("build-prototypes", help="cluster support samples into a bank")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=100)


def _cmd_build_prototypes(args):
    manifest = read_manifest(args.manifest)
    if not manifest.support:
        raise ConfigError(f"{args.manifest}: manifest lists no support samples")
    bank = build_bank_from_manifest(
        manifest, PrototypeBuildConfig(K=args.k, seed=args.seed, max_iters=args.max_iters)
    )
    save_prototypes(bank, args.out)
    print(args.out)


def _add_propose(sub):
    p = sub.add_parser("propose", help="generate change proposals per pair")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--nms-iou", type=float, default=0.8)
    p.add_argument("--min-area", type=int, default=32)


def _cmd_propose(args):
    manifest = read_manifest(args.manifest)
    cfg = ProposalConfig(
        nms_iou_threshold=args.nms_iou, alpha=args.alpha, min_area=args.min_area
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for entry in manifest.pairs:
        proposals = propose_pair(
            entry, cfg, manifest.image_height, manifest.image_width
        )
        if proposals:
            write_mask_set(
                MaskSet(masks=[p.mask for p in proposals]),
                out / f"{entry.id}_proposals.json",
                scores=[p.change_score for p in proposals],
            )
        print(f"{entry.id}: {len(proposals)} proposals", file=sys.stderr)


def _add_refine(sub):
    p = sub.add_parser("refine", help="refine a CAM pseudo-label with proposals")
    p.add_argument("--cam", required=True, help="OVFT activation grid (d=1)")
    p.add_argument("--proposals", required=True, help="mask sidecar JSON")
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--gamma1", type=float, default=0.05)
    p.add_argument("--out", required=True)


def _cmd_refine(args):
    fmap = read_feature_map(args.cam)
    masks, _ = read_mask_set(args.proposals)
    if len(masks) == 0:
        raise ConfigError(f"{args.proposals}: no proposals to refine with")
    h, w = masks[0].height, masks[0].width
    cam = CamMap(data=fmap.data[:, :, 0], image_height=h, image_width=w)
    coarse = binarize_cam(cam, args.beta)
    refined = refine_pseudo_label(coarse, masks, args.gamma1)
    write_mask_set(MaskSet(masks=[InstanceMask.from_dense(refined)]), args.out)
    print(args.out)


def _add_fuse(sub):
    p = sub.add_parser("fuse", help="filter proposals against a change region")
    p.add_argument("--proposals", required=True)
    p.add_argument("--region", required=True, help="mask sidecar; union is the region")
    p.add_argument("--gamma2", type=float, default=0.05)
    p.add_argument("--out", required=True)


def _cmd_fuse(args):
    from .fusion import overlap_ratio

    masks, scores = read_mask_set(args.proposals)
    region_masks, _ = read_mask_set(args.region)
    region = np.zeros((masks[0].height, masks[0].width), dtype=bool)
    for m in region_masks:
        region |= m.to_dense()
    kept, kept_scores = [], []
    for m, s in zip(masks, scores):
        if overlap_ratio(m, region) > args.gamma2:
            kept.append(m)
            kept_scores.append(s)
    if not kept:
        raise ConfigError("no proposals survive fusion; nothing to write")
    write_mask_set(
        MaskSet(masks=kept),
        args.out,
        scores=None if any(s is None for s in kept_scores) else kept_scores,
    )
    print(f"kept {len(kept)} of {len(masks)} proposals", file=sys.stderr)


def _add_evaluate(sub):
    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--manifest", required=True)
    p.add_argument("--predictions", required=True, help="directory of *_pred_t{1,2}.json")
    p.add_argument("--mode", choices=sorted(MODE_FLAGS), default="standard")
    p.add_argument("--out", help="write the JSON report here (table goes to stdout)")


def _cmd_evaluate(args):
    from .core import read_label_raster
    from .retrieval import SemanticChangeMap

    manifest = read_manifest(args.manifest)
    pred_dir = Path(args.predictions)
    n_vocab = len(manifest.classes)
    semantic = n_vocab > 1 and all(
        e.gt_semantic_t1_path is not None for e in manifest.pairs
    )
    if semantic:
        acc = ConfusionAccumulator(n_classes=n_vocab)
    else:
        acc = ConfusionAccumulator(n_classes=2)
    for entry in manifest.pairs:
        p1 = pred_dir / f"{entry.id}_pred_t1.json"
        p2 = pred_dir / f"{entry.id}_pred_t2.json"
        pred = SemanticChangeMap(t1=read_label_raster(p1), t2=read_label_raster(p2))
        if semantic:
            acc.add_semantic(
                pred,
                read_label_raster(entry.gt_semantic_t1_path),
                read_label_raster(entry.gt_semantic_t2_path),
            )
        else:
            if entry.gt_change_path is None:
                raise ConfigError(f"pair {entry.id}: no ground truth to score against")
            gt_masks, _ = read_mask_set(entry.gt_change_path)
            gt = np.zeros_like(pred.t1, dtype=bool)
            for m in gt_masks:
                gt |= m.to_dense()
            acc.add_binary(pred.t1 != 0, gt)
    names = manifest.classes if semantic else ["background", "change"]
    report = finalize(acc, mode=MODE_FLAGS[args.mode], class_names=names)
    if args.out:
        _dump_json(report.to_dict(), args.out)
    print(report.format_table())


def _add_calibrate(sub):
    p = sub.add_parser(
        "calibrate-alpha", help="sweep the change-score threshold on labeled data"
    )
    p.add_argument("--manifest", required=True)
    p.add_argument("--alphas", default="-0.9:0.9:0.1", help="start:stop:step")
    p.add_argument("--nms-iou", type=float, default=0.8)
    p.add_argument("--min-area", type=int, default=32)


def _cmd_calibrate(args):
    manifest = read_manifest(args.manifest)
    try:
        start, stop, step = (float(x) for x in args.alphas.split(":"))
    except ValueError as e:
        raise ConfigError(f"--alphas must be start:stop:step, got {args.alphas}") from e
    grid = np.arange(start, stop + step / 2, step)
    # score once with a permissive threshold, then sweep
    permissive = ProposalConfig(
        nms_iou_threshold=args.nms_iou, alpha=-1.0 - 1e-9, min_area=args.min_area
    )
    scored = []
    for entry in manifest.pairs:
        proposals = propose_pair(
            entry, permissive, manifest.image_height, manifest.image_width
        )
        if entry.gt_change_path is None:
            raise ConfigError(f"pair {entry.id}: calibration needs gt_change_path")
        gt_masks, _ = read_mask_set(entry.gt_change_path)
        gt = np.zeros((manifest.image_height, manifest.image_width), dtype=bool)
        for m in gt_masks:
            gt |= m.to_dense()
        scored.append((proposals, gt))
    best = None
    for alpha in grid:
        acc = ConfusionAccumulator(n_classes=2)
        for proposals, gt in scored:
            pred = np.zeros_like(gt)
            for p in proposals:
                if p.change_score > alpha:
                    pred |= p.mask.to_dense()
            acc.add_binary(pred, gt)
        iou = finalize(acc).per_class[1]["iou"]
        print(f"alpha={alpha:+.2f}  change IoU={iou:6.2f}")
        if best is None or iou > best[1]:
            best = (float(alpha), iou)
    print(f"best: alpha={best[0]:+.2f} (IoU {best[1]:.2f})")


def _add_pipeline(sub):
    p = sub.add_parser("pipeline", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--strategy", choices=sorted(STRATEGY_FLAGS))
    p.add_argument("--alpha", type=float)
    p.add_argument("--gamma2", type=float)
    p.add_argument("--mode", choices=sorted(MODE_FLAGS))
    p.add_argument("--jobs", type=int)
    p.add_argument("--seed", type=int)


def _cmd_pipeline(args):
    overrides = {
        "alpha": args.alpha,
        "gamma2": args.gamma2,
        "jobs": args.jobs,
        "seed": args.seed,
    }
    if args.strategy is not None:
        overrides["strategy"] = STRATEGY_FLAGS[args.strategy]
    if args.mode is not None:
        overrides["mode"] = MODE_FLAGS[args.mode]
    cfg = load_pipeline_config(args.config, overrides)
    report = run_pipeline(cfg)
    print(report.format_table())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ovcd", description="open-vocabulary change-detection retrieval engine"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_synth(sub)
    _add_build_prototypes(sub)
    _add_propose(sub)
    _add_refine(sub)
    _add_fuse(sub)
    _add_evaluate(sub)
    _add_calibrate(sub)
    _add_pipeline(sub)
    return parser


COMMANDS = {
    "synth": _cmd_synth,
    "build-prototypes": _cmd_build_prototypes,
    "propose": _cmd_propose,
    "refine": _cmd_refine,
    "fuse": _cmd_fuse,
    "evaluate": _cmd_evaluate,
    "calibrate-alpha": _cmd_calibrate,
    "pipeline": _cmd_pipeline,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except OvcdError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
