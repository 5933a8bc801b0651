"""Mask and image measurements: confusion metrics, edge placement error,
Laplacian exposure score, component counts, and the composite mask score
used to rank predictions (lower is better).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .raster import BinaryMask, GrayImage, check_image, check_mask, label_components
from .refine import contour_point_set, extract_contours


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(pred: BinaryMask, gt: BinaryMask) -> ConfusionCounts:
    """Exact pixelwise confusion counts; masks must share dimensions."""
    pred = check_mask(pred)
    gt = check_mask(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"mask dimensions differ: {pred.shape} vs {gt.shape}")
    tp = int((pred & gt).sum())
    fp = int((pred & ~gt).sum())
    fn = int((~pred & gt).sum())
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=pred.size - tp - fp - fn)


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def iou(c: ConfusionCounts) -> float:
    return _ratio(c.tp, c.tp + c.fp + c.fn)


def precision(c: ConfusionCounts) -> float:
    return _ratio(c.tp, c.tp + c.fp)


def recall(c: ConfusionCounts) -> float:
    return _ratio(c.tp, c.tp + c.fn)


def f1(c: ConfusionCounts) -> float:
    p, r = precision(c), recall(c)
    return 2 * p * r / (p + r) if p + r else 0.0


def dice_loss(c: ConfusionCounts) -> float:
    """1 - Dice coefficient; 0 for identical masks."""
    den = 2 * c.tp + c.fp + c.fn
    return 1.0 - _ratio(2 * c.tp, den) if den else 0.0


def mask_iou(pred: BinaryMask, gt: BinaryMask) -> float:
    return iou(confusion(pred, gt))


@dataclass(frozen=True)
class EpeResult:
    mean_epe: float
    max_epe: float
    sample_count: int


def epe(pred_points, gt_points, empty_distance: float | None = None) -> EpeResult:
    """Edge placement error from reference points to the predicted set.

    For each reference (ground-truth) point, the Euclidean distance to the
    nearest predicted point; mean and max are taken over the reference
    points. An empty predicted set scores the `empty_distance` sentinel
    (conventionally the image diagonal), which must then be provided.
    """
    gt = np.atleast_2d(np.asarray(list(gt_points), dtype=np.float64))
    if gt.size == 0:
        raise ValueError("reference point set must be non-empty")
    pred = np.asarray(list(pred_points), dtype=np.float64)
    if pred.size == 0:
        if empty_distance is None:
            raise ValueError("empty predicted point set and no sentinel distance given")
        return EpeResult(mean_epe=float(empty_distance), max_epe=float(empty_distance),
                         sample_count=gt.shape[0])
    pred = np.atleast_2d(pred)
    dists, _ = cKDTree(pred).query(gt)
    return EpeResult(mean_epe=float(dists.mean()), max_epe=float(dists.max()),
                     sample_count=gt.shape[0])


def exposure_score(img: GrayImage) -> float:
    """Variance of the 3x3 Laplacian response over interior pixels.

    The kernel is [0, 1, 0; 1, -4, 1; 0, 1, 0]; images smaller than 3x3
    have no interior and are rejected.
    """
    img = check_image(img)
    if img.shape[0] < 3 or img.shape[1] < 3:
        raise ValueError(f"image must be at least 3x3, got {img.shape}")
    a = img.astype(np.int64)
    lap = (a[:-2, 1:-1] + a[2:, 1:-1] + a[1:-1, :-2] + a[1:-1, 2:] - 4 * a[1:-1, 1:-1])
    return float(np.var(lap.astype(np.float64)))


def mask_count(mask: BinaryMask) -> int:
    """Number of 8-connected foreground components."""
    return label_components(check_mask(mask), connectivity=8).component_count


@dataclass(frozen=True)
class ScoreWeights:
    iou_weight: float = 1.0
    count_weight: float = 0.1
    epe_weight: float = 0.01

    def __post_init__(self):
        for v in (self.iou_weight, self.count_weight, self.epe_weight):
            if not (math.isfinite(v) and v >= 0):
                raise ValueError("score weights must be finite and non-negative")


def composite_score(pred: BinaryMask, gt: BinaryMask, w: ScoreWeights | None = None) -> float:
    """Composite mask score, lower is better.

    dice_loss minus the weighted overlap reward, plus weighted penalties
    for extra fragments (component count above one) and mean edge
    placement error between the two boundaries. A perfect prediction
    scores exactly -iou_weight.
    """
    w = w or ScoreWeights()
    pred = check_mask(pred)
    gt = check_mask(gt)
    c = confusion(pred, gt)
    if not gt.any():
        raise ValueError("ground-truth mask must be non-empty")
    h, width = gt.shape
    diagonal = math.hypot(width, h)
    gt_boundary = contour_point_set(extract_contours(gt))
    pred_boundary = contour_point_set(extract_contours(pred))
    epe_term = epe(pred_boundary, gt_boundary, empty_distance=diagonal).mean_epe
    count_term = max(0, mask_count(pred) - 1)
    return (dice_loss(c) - w.iou_weight * iou(c)
            + w.count_weight * count_term + w.epe_weight * epe_term)
