"""Weakly supervised change localizer: a Siamese encoder trained from
image-level change labels, with pixel supervision distilled from its own
class activation maps and refined by the primary package's mask arithmetic.

Exports per-pair change-region rasters (mask sidecars) and activation maps
(feature tensor files) that the primary's fusion stage consumes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ovcd import (
    CamMap,
    FeatureMap,
    InstanceMask,
    MaskSet,
    binarize_cam,
    refine_pseudo_label,
    write_feature_map,
    write_mask_set,
)

from .errors import AdapterError, TrainingError

__all__ = ["S2CTrainConfig", "TrainPair", "TrainResult", "train_s2c", "export_predictions"]


@dataclass
class S2CTrainConfig:
    lam: float = 1.0
    beta: float = 0.5
    gamma1: float = 0.05
    batch_size: int = 8
    iterations: int = 10_000
    input_size: int = 256
    learning_rate: float = 1e-3
    seed: int = 0
    device: str = "cpu"

    def __post_init__(self):
        if self.lam < 0:
            raise AdapterError("lam must be >= 0")
        if not 0.0 <= self.beta <= 1.0:
            raise AdapterError("beta must be in [0, 1]")
        if not 0.0 <= self.gamma1 <= 1.0:
            raise AdapterError("gamma1 must be in [0, 1]")
        if self.batch_size < 1 or self.iterations < 1:
            raise AdapterError("batch_size and iterations must be >= 1")
        if self.input_size < 8 or self.input_size % 8:
            raise AdapterError("input_size must be a positive multiple of 8")


@dataclass
class TrainPair:
    """One bi-temporal training sample with its image-level label.

    ``proposals`` optionally carries class-agnostic instance masks (at
    ``input_size`` resolution) used to refine the pixel pseudo-label; without
    them the coarse activation-map label is used as-is.
    """

    t1: np.ndarray
    t2: np.ndarray
    changed: bool
    proposals: MaskSet | None = None


@dataclass
class TrainResult:
    model: nn.Module
    losses: list[float]
    losses_img: list[float]
    losses_pix: list[float]
    config: S2CTrainConfig


class _Encoder(nn.Module):
    """Small strided CNN; any stronger backbone is a drop-in replacement."""

    def __init__(self, channels: int = 32):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(3, channels // 2, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels // 2, channels, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels, channels, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
        )

    def forward(self, x):
        return self.net(x)


class S2CModel(nn.Module):
    """Siamese encoder; temporal fusion by element-wise absolute difference.

    The classifier is global average pooling followed by a 1x1 convolution,
    so applying that convolution spatially yields the activation map.  The
    segmentation head is a per-pixel MLP (1x1 convolutions) with dropout.
    """

    def __init__(self, channels: int = 32, dropout: float = 0.1):
        super().__init__()
        self.encoder = _Encoder(channels)
        self.classifier = nn.Conv2d(channels, 1, 1)
        self.seg_head = nn.Sequential(
            nn.Conv2d(channels, channels, 1),
            nn.ReLU(inplace=True),
            nn.Dropout2d(dropout),
            nn.Conv2d(channels, channels, 1),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels, 1, 1),
        )

    def forward(self, x1, x2):
        fused = torch.abs(self.encoder(x1) - self.encoder(x2))
        cam = self.classifier(fused)  # (B, 1, h, w)
        image_logit = cam.mean(dim=(2, 3)).squeeze(1)  # GAP -> (B,)
        seg_logit = self.seg_head(fused)  # (B, 1, h, w)
        return image_logit, cam.squeeze(1), seg_logit.squeeze(1)


def _to_batch(images: list[np.ndarray], size: int, device) -> torch.Tensor:
    tensors = []
    for img in images:
        arr = np.asarray(img)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise AdapterError(f"expected (H, W, 3) images, got {arr.shape}")
        t = torch.from_numpy(np.ascontiguousarray(arr)).float().permute(2, 0, 1)
        if arr.dtype == np.uint8:
            t = t / 255.0
        tensors.append(t)
    batch = torch.stack(tensors).to(device)
    if batch.shape[-2:] != (size, size):
        batch = F.interpolate(
            batch, size=(size, size), mode="bilinear", align_corners=True
        )
    return batch


def _pixel_targets(
    cam: torch.Tensor, pairs: list[TrainPair], changed: torch.Tensor, config
) -> torch.Tensor:
    """Pseudo-labels at input resolution: binarized activation maps, refined
    by overlap with the per-pair proposal masks.  Unchanged pairs get
    all-background targets."""
    size = config.input_size
    targets = np.zeros((len(pairs), size, size), dtype=np.float32)
    cam_np = cam.detach().cpu().numpy().astype(np.float64)
    for i, pair in enumerate(pairs):
        if not changed[i]:
            continue
        coarse = binarize_cam(
            CamMap(cam_np[i], image_height=size, image_width=size), config.beta
        )
        if pair.proposals is not None and len(pair.proposals) > 0:
            coarse = refine_pseudo_label(coarse, pair.proposals, config.gamma1)
        targets[i] = coarse
    return torch.from_numpy(targets).to(cam.device)


def train_s2c(pairs: list[TrainPair], config: S2CTrainConfig) -> TrainResult:
    """Train on image-level labels; loss = image term + lam * pixel term.

    With ``lam == 0`` the pixel term is skipped entirely, so the recorded
    total loss equals the image loss exactly.
    """
    if not pairs:
        raise AdapterError("no training pairs")
    torch.manual_seed(config.seed)
    device = torch.device(config.device)
    model = S2CModel().to(device)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    rng = np.random.default_rng(config.seed)
    losses, losses_img, losses_pix = [], [], []
    model.train()
    for _ in range(config.iterations):
        idx = rng.choice(len(pairs), size=min(config.batch_size, len(pairs)), replace=False)
        batch = [pairs[i] for i in idx]
        x1 = _to_batch([p.t1 for p in batch], config.input_size, device)
        x2 = _to_batch([p.t2 for p in batch], config.input_size, device)
        y = torch.tensor([float(p.changed) for p in batch], device=device)
        image_logit, cam, seg_logit = model(x1, x2)
        loss_img = F.binary_cross_entropy_with_logits(image_logit, y)
        if config.lam > 0:
            targets = _pixel_targets(cam, batch, y, config)
            seg_full = F.interpolate(
                seg_logit.unsqueeze(1),
                size=(config.input_size, config.input_size),
                mode="bilinear",
                align_corners=True,
            ).squeeze(1)
            loss_pix = F.binary_cross_entropy_with_logits(seg_full, targets)
            loss = loss_img + config.lam * loss_pix
            losses_pix.append(float(loss_pix.detach()))
        else:
            loss = loss_img
            losses_pix.append(0.0)
        if not torch.isfinite(loss):
            raise TrainingError(f"non-finite loss at iteration {len(losses)}")
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        losses.append(float(loss.detach()))
        losses_img.append(float(loss_img.detach()))
    return TrainResult(
        model=model,
        losses=losses,
        losses_img=losses_img,
        losses_pix=losses_pix,
        config=config,
    )


def export_predictions(
    result: TrainResult,
    pairs: list[TrainPair],
    pair_ids: list[str],
    out_dir,
    threshold: float = 0.5,
) -> list[tuple[Path, Path]]:
    """Write a change-region raster and an activation-map tensor per pair.

    The region is the thresholded segmentation probability at input
    resolution, exported as a single-instance mask sidecar; the activation
    map is exported at feature resolution as an (h, w, 1) tensor file.
    """
    if len(pairs) != len(pair_ids):
        raise AdapterError("pairs and pair_ids differ in length")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = result.config
    device = next(result.model.parameters()).device
    result.model.eval()
    outputs = []
    with torch.no_grad():
        for pair, pid in zip(pairs, pair_ids):
            x1 = _to_batch([pair.t1], config.input_size, device)
            x2 = _to_batch([pair.t2], config.input_size, device)
            _, cam, seg_logit = result.model(x1, x2)
            prob = torch.sigmoid(
                F.interpolate(
                    seg_logit.unsqueeze(1),
                    size=(config.input_size, config.input_size),
                    mode="bilinear",
                    align_corners=True,
                )
            )[0, 0]
            region = prob.cpu().numpy() > threshold
            region_path = out_dir / f"{pid}_region.json"
            # an all-background region still exports one (zero-area) instance
            # so the sidecar keeps its dimensions
            write_mask_set(
                MaskSet(masks=[InstanceMask.from_dense(region)]), region_path
            )
            cam_path = out_dir / f"{pid}_cam.ovft"
            cam_grid = cam[0].cpu().numpy().astype(np.float32)[:, :, None]
            write_feature_map(FeatureMap(data=cam_grid), cam_path)
            outputs.append((region_path, cam_path))
    return outputs
