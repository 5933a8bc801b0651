"""Training-pair access: corpus manifest parsing and prompt sampling."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .pgm import read_mask, read_pgm


@dataclass(frozen=True)
class Pair:
    id: str
    image: np.ndarray   # uint8 (H, W)
    gt: np.ndarray      # bool (H, W)


def load_pairs(manifest_path: str | Path) -> list[Pair]:
    """Read (image, ground-truth mask) pairs listed by a corpus manifest."""
    path = Path(manifest_path)
    if path.is_dir():
        path = path / "manifest.json"
    doc = json.loads(path.read_text(encoding="utf-8"))
    pairs = []
    for rec in doc["records"]:
        image = read_pgm(path.parent / rec["image_path"])
        gt = read_mask(path.parent / rec["gt_mask_path"])
        if gt.shape != image.shape:
            raise ValueError(f"{rec['id']}: image/mask shapes differ")
        if not gt.any():
            raise ValueError(f"{rec['id']}: empty ground-truth mask")
        pairs.append(Pair(id=rec["id"], image=image, gt=gt))
    if not pairs:
        raise ValueError(f"{path}: manifest lists no records")
    return pairs


def sample_interior_point(gt: np.ndarray, generator: torch.Generator) -> tuple[int, int]:
    """Uniformly sample one (x, y) pixel strictly inside the mask foreground."""
    ys, xs = np.nonzero(gt)
    idx = int(torch.randint(len(xs), (1,), generator=generator).item())
    return int(xs[idx]), int(ys[idx])


def deterministic_point(gt: np.ndarray) -> tuple[int, int]:
    """Foreground pixel nearest the foreground centroid (stable prompts for
    validation scoring)."""
    ys, xs = np.nonzero(gt)
    cx, cy = xs.mean(), ys.mean()
    idx = int(np.argmin((xs - cx) ** 2 + (ys - cy) ** 2))
    return int(xs[idx]), int(ys[idx])


def to_tensors(pair: Pair, device: str) -> tuple[torch.Tensor, torch.Tensor]:
    image = torch.from_numpy(pair.image).to(device=device, dtype=torch.float32)
    image = image[None, None] / 255.0
    gt = torch.from_numpy(pair.gt).to(device=device, dtype=torch.float32)
    return image, gt
