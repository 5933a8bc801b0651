"""Shared test constants and small helpers."""

from __future__ import annotations

import numpy as np

CORPUS_SEED = 2024
ORACLE_PERTURBATIONS = ("erode:1", "dilate:1", "translate:1,1")


def random_mask(rng: np.random.Generator, h: int, w: int,
                density: float | None = None) -> np.ndarray:
    if density is None:
        density = rng.uniform(0.2, 0.8)
    return rng.random((h, w)) < density
