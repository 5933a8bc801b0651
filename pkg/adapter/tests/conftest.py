"""Fixtures: tiny synthetic pair corpora (standalone, written in the
pipeline's corpus manifest schema) and a briefly pretrained base
checkpoint.

The pretraining corpus uses inverted contrast (dark structures on a
bright field), so the fine-tuning corpus (bright on dark) sits across a
real domain gap: encoder-only adaptation has actual work to do, as in
the production recipe.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from maskadapter.pgm import write_mask, write_pgm
from maskadapter.train import pretrain


def make_pair(rng: np.random.Generator, size: int = 32,
              inverted: bool = False) -> tuple[np.ndarray, np.ndarray]:
    gt = np.zeros((size, size), dtype=bool)
    w, h = rng.integers(10, 18, size=2)
    x = rng.integers(2, size - w - 2)
    y = rng.integers(2, size - h - 2)
    gt[y:y + h, x:x + w] = True
    fg, bg = (60, 200) if inverted else (170, 30)
    image = np.where(gt, fg, bg).astype(np.float64)
    image += rng.normal(0, 12, size=gt.shape)
    return np.clip(image, 0, 255).astype(np.uint8), gt


def write_pair_corpus(root: Path, count: int, seed: int, inverted: bool = False) -> Path:
    (root / "images").mkdir(parents=True)
    (root / "masks").mkdir()
    rng = np.random.default_rng(seed)
    records = []
    for i in range(count):
        image, gt = make_pair(rng, inverted=inverted)
        image_rel = f"images/pair{i}.pgm"
        mask_rel = f"masks/pair{i}.gt.pgm"
        write_pgm(root / image_rel, image)
        write_mask(root / mask_rel, gt)
        records.append({"id": f"pair{i}", "case_id": "case01",
                        "image_path": image_rel, "gt_mask_path": mask_rel,
                        "params": {}})
    (root / "manifest.json").write_text(
        json.dumps({"schema_version": 1, "records": records}, indent=2))
    return root


@pytest.fixture(scope="session")
def pair_corpus(tmp_path_factory) -> Path:
    return write_pair_corpus(tmp_path_factory.mktemp("pairs"), count=5, seed=77)


@pytest.fixture(scope="session")
def base_checkpoint(tmp_path_factory) -> Path:
    corpus = write_pair_corpus(tmp_path_factory.mktemp("pretrain"), count=8,
                               seed=1234, inverted=True)
    path = tmp_path_factory.mktemp("ckpt") / "base.pt"
    return pretrain(corpus, path, iterations=250, learning_rate=3e-3, seed=5)
