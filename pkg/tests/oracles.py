"""Independent brute-force oracles used by the unit and acceptance tests.

Everything here is scalar-loop reference code, deliberately kept free of
the library's vectorized implementations.
"""

import math

import numpy as np


def bilinear_scalar(data, sy, sx):
    """Corner-aligned bilinear sample of an (h, w, d) grid at one point."""
    h, w, _ = data.shape
    y0 = min(int(math.floor(sy)), h - 2) if h > 1 else 0
    x0 = min(int(math.floor(sx)), w - 2) if w > 1 else 0
    ty = sy - y0 if h > 1 else 0.0
    tx = sx - x0 if w > 1 else 0.0
    y1 = min(y0 + 1, h - 1)
    x1 = min(x0 + 1, w - 1)
    a = data[y0, x0].astype(np.float64)
    b = data[y0, x1].astype(np.float64)
    c = data[y1, x0].astype(np.float64)
    e = data[y1, x1].astype(np.float64)
    top = a + tx * (b - a)
    bot = c + tx * (e - c)
    return top + ty * (bot - top)


def upsample_oracle(data, th, tw):
    h, w, d = data.shape
    out = np.zeros((th, tw, d))
    for y in range(th):
        sy = 0.0 if th == 1 else y * (h - 1) / (th - 1)
        for x in range(tw):
            sx = 0.0 if tw == 1 else x * (w - 1) / (tw - 1)
            out[y, x] = bilinear_scalar(data, sy, sx)
    return out


def masked_pool_oracle(data, dense_mask, image_h, image_w):
    """Upsample then average over foreground pixels, one pixel at a time."""
    up = upsample_oracle(data, image_h, image_w)
    total = np.zeros(data.shape[2])
    count = 0
    for y in range(image_h):
        for x in range(image_w):
            if dense_mask[y, x]:
                total += up[y, x]
                count += 1
    return total / count


def iou_oracle(a, b):
    inter = 0
    union = 0
    h, w = a.shape
    for y in range(h):
        for x in range(w):
            if a[y, x] and b[y, x]:
                inter += 1
            if a[y, x] or b[y, x]:
                union += 1
    return inter / union if union else 0.0


def overlap_ratio_oracle(mask, raster):
    inter = 0
    area = 0
    h, w = mask.shape
    for y in range(h):
        for x in range(w):
            if mask[y, x]:
                area += 1
                if raster[y, x]:
                    inter += 1
    return inter / area


def best_two_partition_1d(values):
    """Exhaustive minimum-inertia 2-partition of a 1-d point set."""
    values = sorted(values)
    n = len(values)
    best = None
    for cut in range(1, n):
        left, right = values[:cut], values[cut:]
        ml = sum(left) / len(left)
        mr = sum(right) / len(right)
        inertia = sum((v - ml) ** 2 for v in left) + sum((v - mr) ** 2 for v in right)
        if best is None or inertia < best[0]:
            best = (inertia, ml, mr)
    return best[1], best[2]


def confusion_oracle(pred, gt, n_classes):
    """Per-class TP/FP/FN by explicit pixel tally."""
    tp = [0] * n_classes
    fp = [0] * n_classes
    fn = [0] * n_classes
    h, w = pred.shape
    for y in range(h):
        for x in range(w):
            p, g = int(pred[y, x]), int(gt[y, x])
            if p == g:
                tp[p] += 1
            else:
                fp[p] += 1
                fn[g] += 1
    return tp, fp, fn


def random_mask_set(rng, height, width, n_masks):
    """Random rectangles as dense boolean masks (some may coincide)."""
    masks = []
    for _ in range(n_masks):
        y0 = int(rng.integers(0, height - 1))
        x0 = int(rng.integers(0, width - 1))
        y1 = int(rng.integers(y0 + 1, height + 1))
        x1 = int(rng.integers(x0 + 1, width + 1))
        m = np.zeros((height, width), dtype=bool)
        m[y0:y1, x0:x1] = True
        masks.append(m)
    return masks
