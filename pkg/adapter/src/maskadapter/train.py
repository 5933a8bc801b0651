"""Selective fine-tuning: frozen mask decoder, trainable encoders.

Per step, one training pair gets a freshly sampled random point from
inside its ground-truth mask as the prompt (implicit augmentation), the
composite loss is computed on the raw image (no denoising), and only
encoder parameters update. Early stopping watches a held-out validation
subset. The decoder is checksummed before and after as a hard guarantee.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .data import Pair, deterministic_point, load_pairs, sample_interior_point, to_tensors
from .losses import LossWeights, boundary_distance_map, training_loss
from .model import PromptSegNet, load_checkpoint, module_checksum, save_checkpoint


@dataclass(frozen=True)
class FinetuneConfig:
    learning_rate: float = 1e-5
    weight_decay: float = 0.01
    max_iterations: int = 1000
    eval_every: int = 10
    patience: int = 5            # early stop after this many non-improving evals
    val_fraction: float = 0.2
    weights: LossWeights = field(default_factory=LossWeights)
    device: str = "cpu"
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class FinetuneResult:
    checkpoint_path: Path
    log_path: Path
    iterations: int
    first_loss: float
    final_loss: float
    best_val_loss: float
    decoder_checksum_before: str
    decoder_checksum_after: str
    stopped_early: bool


def pretrain(manifest_path: str | Path, checkpoint_out: str | Path,
             iterations: int = 300, learning_rate: float = 3e-3,
             seed: int = 0, device: str = "cpu",
             weights: LossWeights | None = None) -> Path:
    """Train every parameter (decoder included) from scratch on a corpus.

    This produces the base checkpoint that encoder-only fine-tuning then
    adapts; it stands in for a large pretrained model in environments
    without one.
    """
    torch.manual_seed(seed)
    generator = torch.Generator().manual_seed(seed)
    weights = weights or LossWeights()
    model = PromptSegNet().to(device)
    model.train()
    optimizer = torch.optim.AdamW(model.parameters(), lr=learning_rate,
                                  weight_decay=0.01)
    pairs = load_pairs(manifest_path)
    dist_maps = {
        p.id: torch.from_numpy(boundary_distance_map(p.gt)).to(device, torch.float32)
        for p in pairs
    }
    for it in range(1, iterations + 1):
        pair = pairs[int(torch.randint(len(pairs), (1,), generator=generator).item())]
        image, gt = to_tensors(pair, device)
        point = sample_interior_point(pair.gt, generator)
        logits, iou_pred = model(image, torch.tensor([point], dtype=torch.float32,
                                                     device=device))
        loss, _ = training_loss(logits[0], iou_pred[0], gt, point,
                                dist_maps[pair.id], weights)
        if not torch.isfinite(loss):
            raise RuntimeError(f"non-finite pretraining loss at iteration {it}")
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
    checkpoint_out = Path(checkpoint_out)
    checkpoint_out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, checkpoint_out)
    return checkpoint_out


def split_pairs(pairs: list[Pair], val_fraction: float,
                generator: torch.Generator) -> tuple[list[Pair], list[Pair]]:
    """Deterministic train/validation split; validation holds at least one
    pair whenever there are two or more."""
    if len(pairs) < 2:
        return pairs, pairs
    order = torch.randperm(len(pairs), generator=generator).tolist()
    n_val = max(1, int(round(len(pairs) * val_fraction)))
    val_idx = set(order[:n_val])
    train = [p for i, p in enumerate(pairs) if i not in val_idx]
    val = [p for i, p in enumerate(pairs) if i in val_idx]
    return train, val


def _validation_loss(model: PromptSegNet, pairs: list[Pair], dist_maps: dict,
                     w: LossWeights, device: str) -> float:
    model.eval()
    total = 0.0
    with torch.no_grad():
        for pair in pairs:
            image, gt = to_tensors(pair, device)
            point = deterministic_point(pair.gt)
            logits, iou_pred = model(image, torch.tensor([point], dtype=torch.float32,
                                                         device=device))
            loss, _ = training_loss(logits[0], iou_pred[0], gt, point,
                                    dist_maps[pair.id], w)
            total += float(loss)
    model.train()
    return total / len(pairs)


def finetune(manifest_path: str | Path, checkpoint_in: str | Path | None,
             checkpoint_out: str | Path, log_path: str | Path,
             cfg: FinetuneConfig | None = None) -> FinetuneResult:
    """Fine-tune the encoders on a corpus of image/mask pairs.

    `checkpoint_in` of None starts from a freshly initialized network
    (seeded); otherwise the checkpoint is loaded and must be readable.
    Writes the updated checkpoint and a JSONL training log of
    {iter, loss, val_loss} records (val_loss only on evaluation steps).
    """
    cfg = cfg or FinetuneConfig()
    torch.manual_seed(cfg.seed)
    generator = torch.Generator().manual_seed(cfg.seed)

    if checkpoint_in is None:
        model = PromptSegNet()
    else:
        model = load_checkpoint(checkpoint_in)
    model.to(cfg.device)
    model.train()

    # The decoder stays exactly as pre-trained; only encoders adapt.
    for p in model.mask_decoder.parameters():
        p.requires_grad_(False)
    decoder_before = module_checksum(model.mask_decoder)

    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.AdamW(trainable, lr=cfg.learning_rate,
                                  weight_decay=cfg.weight_decay)

    pairs = load_pairs(manifest_path)
    train_pairs, val_pairs = split_pairs(pairs, cfg.val_fraction, generator)
    dist_maps = {
        p.id: torch.from_numpy(boundary_distance_map(p.gt)).to(cfg.device, torch.float32)
        for p in pairs
    }

    log_path = Path(log_path)
    log_path.parent.mkdir(parents=True, exist_ok=True)
    best_val = math.inf
    stale = 0
    stopped_early = False
    first_loss = final_loss = math.nan
    iterations = 0

    with open(log_path, "w", encoding="utf-8") as log:
        for it in range(1, cfg.max_iterations + 1):
            iterations = it
            pair = train_pairs[int(torch.randint(len(train_pairs), (1,),
                                                 generator=generator).item())]
            image, gt = to_tensors(pair, cfg.device)
            point = sample_interior_point(pair.gt, generator)
            logits, iou_pred = model(image, torch.tensor([point], dtype=torch.float32,
                                                         device=cfg.device))
            loss, composite = training_loss(logits[0], iou_pred[0], gt, point,
                                            dist_maps[pair.id], cfg.weights)
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"non-finite training loss at iteration {it} "
                    f"(pair {pair.id}, composite {float(composite.detach())!r})")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()

            final_loss = float(loss.detach())
            if it == 1:
                first_loss = final_loss
            entry = {"iter": it, "loss": final_loss, "val_loss": None}
            if it % cfg.eval_every == 0 or it == cfg.max_iterations:
                val_loss = _validation_loss(model, val_pairs, dist_maps,
                                            cfg.weights, cfg.device)
                entry["val_loss"] = val_loss
                if val_loss < best_val - 1e-9:
                    best_val = val_loss
                    stale = 0
                else:
                    stale += 1
                    if stale >= cfg.patience:
                        log.write(json.dumps(entry) + "\n")
                        stopped_early = True
                        break
            log.write(json.dumps(entry) + "\n")

    decoder_after = module_checksum(model.mask_decoder)
    if decoder_after != decoder_before:
        raise RuntimeError("mask decoder changed during fine-tuning")

    checkpoint_out = Path(checkpoint_out)
    checkpoint_out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, checkpoint_out)
    return FinetuneResult(checkpoint_path=checkpoint_out, log_path=log_path,
                          iterations=iterations, first_loss=first_loss,
                          final_loss=final_loss, best_val_loss=best_val,
                          decoder_checksum_before=decoder_before,
                          decoder_checksum_after=decoder_after,
                          stopped_early=stopped_early)
