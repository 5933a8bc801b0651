import numpy as np
import pytest
import torch

from maskadapter.losses import (LossWeights, boundary_distance_map, composite_loss,
                                edge_weighted_error, fragment_mass, soft_dice_loss,
                                soft_iou)


def square_gt(size=24, box=(6, 6, 12, 12)) -> torch.Tensor:
    gt = torch.zeros(size, size)
    x, y, w, h = box
    gt[y:y + h, x:x + w] = 1.0
    return gt


class TestPerfectPredictionAnchor:
    def test_loss_equals_negative_iou_weight(self):
        gt = square_gt()
        dist = torch.from_numpy(boundary_distance_map(gt.numpy().astype(bool))).float()
        for w in (LossWeights(), LossWeights(iou_weight=2.0, count_weight=0.5,
                                             epe_weight=0.2)):
            loss = composite_loss(gt.clone(), gt, (12, 12), dist, w)
            assert float(loss) == pytest.approx(-w.iou_weight, abs=1e-4)


class TestTerms:
    def test_soft_dice_zero_for_identity(self):
        gt = square_gt()
        assert float(soft_dice_loss(gt, gt)) == pytest.approx(0.0, abs=1e-6)
        assert float(soft_iou(gt, gt)) == pytest.approx(1.0, abs=1e-6)

    def test_fragment_mass_flags_disconnected_blob(self):
        pred = square_gt()
        pred[20:23, 20:23] = 1.0   # fragment away from the prompt component
        mass = fragment_mass(pred, (12, 12))
        assert float(mass) == pytest.approx(9 / (144 + 9), rel=1e-4)
        assert float(fragment_mass(square_gt(), (12, 12))) == pytest.approx(0.0, abs=1e-6)

    def test_edge_error_grows_with_distance(self):
        gt = square_gt()
        dist = torch.from_numpy(boundary_distance_map(gt.numpy().astype(bool))).float()
        near = gt.clone()
        near[5, 6:18] = 1.0          # one row just outside the boundary
        far = gt.clone()
        far[1, 6:18] = 1.0           # same mass, farther out
        assert float(edge_weighted_error(far, gt, dist)) > \
            float(edge_weighted_error(near, gt, dist))

    def test_boundary_distance_map_zero_on_boundary(self):
        gt = square_gt().numpy().astype(bool)
        dist = boundary_distance_map(gt)
        assert dist[6, 6] == 0.0          # corner of the square is boundary
        assert dist[12, 12] > 0.0         # interior
        assert dist[0, 0] > 0.0           # far background

    def test_degenerate_masks_give_zero_map(self):
        assert not boundary_distance_map(np.zeros((8, 8), bool)).any()
        assert not boundary_distance_map(np.ones((8, 8), bool)).any()


class TestOrdering:
    def test_worse_masks_score_higher(self):
        gt = square_gt()
        dist = torch.from_numpy(boundary_distance_map(gt.numpy().astype(bool))).float()
        w = LossWeights()
        perfect = float(composite_loss(gt.clone(), gt, (12, 12), dist, w))
        shrunk = torch.zeros_like(gt)
        shrunk[8:16, 8:16] = 1.0
        shifted = torch.roll(gt, shifts=(3, 3), dims=(0, 1))
        split = gt.clone()
        split[11:13, :] = 0.0
        for worse in (shrunk, shifted, split):
            assert float(composite_loss(worse, gt, (12, 12), dist, w)) > perfect

    def test_gradients_flow_through_all_terms(self):
        gt = square_gt()
        dist = torch.from_numpy(boundary_distance_map(gt.numpy().astype(bool))).float()
        logits = torch.randn(24, 24, requires_grad=True)
        probs = torch.sigmoid(logits)
        loss = composite_loss(probs, gt, (12, 12), dist, LossWeights())
        loss.backward()
        assert logits.grad is not None
        assert torch.isfinite(logits.grad).all()
        assert logits.grad.abs().sum() > 0
