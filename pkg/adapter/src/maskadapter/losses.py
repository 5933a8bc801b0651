"""Differentiable training loss for high-fidelity masks.

The scalar mirrors the pipeline's composite mask score (lower is better):
a segmentation term plus a weighted overlap reward (subtracted) and two
weighted penalties (added). The count and edge terms are continuous
relaxations of their discrete counterparts:

* count: predicted probability mass disconnected from the prompt point's
  thresholded component (the discrete version counts extra components);
* edge: L1 mask disagreement weighted by distance to the reference
  boundary, so errors far from the true edge cost proportionally more
  (the discrete version measures nearest-boundary distances).

A perfect binary prediction scores exactly -iou_weight, matching the
discrete score's anchor, segmentation floor aside.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from scipy import ndimage

EPS = 1e-6


@dataclass(frozen=True)
class LossWeights:
    iou_weight: float = 1.0
    count_weight: float = 0.1
    epe_weight: float = 0.01
    score_supervision_weight: float = 1.0


def soft_dice_loss(probs: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    inter = (probs * gt).sum()
    return 1.0 - (2.0 * inter + EPS) / (probs.sum() + gt.sum() + EPS)


def soft_iou(probs: torch.Tensor, gt: torch.Tensor) -> torch.Tensor:
    inter = (probs * gt).sum()
    union = probs.sum() + gt.sum() - inter
    return (inter + EPS) / (union + EPS)


def fragment_mass(probs: torch.Tensor, point: tuple[int, int]) -> torch.Tensor:
    """Fraction of predicted mass disconnected from the prompt's component.

    The component partition comes from the thresholded prediction and is
    treated as constant; gradients flow through the masked mass ratio.
    """
    binary = (probs.detach().cpu().numpy() > 0.5)
    if not binary.any():
        return probs.sum() * 0.0
    labels, _ = ndimage.label(binary, structure=np.ones((3, 3)))
    x, y = point
    own = labels[int(y), int(x)]
    outside = torch.as_tensor((labels != own) & binary, dtype=probs.dtype,
                              device=probs.device)
    return (probs * outside).sum() / (probs.sum() + EPS)


def boundary_distance_map(gt: np.ndarray) -> np.ndarray:
    """Per-pixel Euclidean distance to the reference mask's boundary."""
    gt = gt.astype(bool)
    if not gt.any() or gt.all():
        return np.zeros(gt.shape, dtype=np.float64)
    eroded = ndimage.binary_erosion(gt, structure=np.ones((3, 3)), border_value=0)
    boundary = gt & ~eroded
    return ndimage.distance_transform_edt(~boundary)


def edge_weighted_error(probs: torch.Tensor, gt: torch.Tensor,
                        dist_map: torch.Tensor) -> torch.Tensor:
    return ((probs - gt).abs() * dist_map).sum() / (gt.sum() + EPS)


def composite_loss(probs: torch.Tensor, gt: torch.Tensor,
                   point: tuple[int, int], dist_map: torch.Tensor,
                   w: LossWeights) -> torch.Tensor:
    return (soft_dice_loss(probs, gt)
            - w.iou_weight * soft_iou(probs, gt)
            + w.count_weight * fragment_mass(probs, point)
            + w.epe_weight * edge_weighted_error(probs, gt, dist_map))


def training_loss(logits: torch.Tensor, iou_pred: torch.Tensor,
                  gt: torch.Tensor, point: tuple[int, int],
                  dist_map: torch.Tensor, w: LossWeights
                  ) -> tuple[torch.Tensor, torch.Tensor]:
    """Multi-candidate objective: the best candidate's composite loss plus
    predicted-IoU supervision toward each candidate's actual soft IoU.

    Returns (total, best-candidate composite) for logging.
    """
    probs = torch.sigmoid(logits)           # (N, H, W)
    composites = torch.stack([
        composite_loss(probs[i], gt, point, dist_map, w)
        for i in range(probs.shape[0])
    ])
    best = composites.min()
    actual_iou = torch.stack([soft_iou(probs[i], gt) for i in range(probs.shape[0])])
    score_err = ((iou_pred - actual_iou.detach()) ** 2).mean()
    return best + w.score_supervision_weight * score_err, best
