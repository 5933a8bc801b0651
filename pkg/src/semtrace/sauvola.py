"""Traditional fallback segmentation: Sauvola adaptive thresholding.

The per-pixel threshold is T(x, y) = m * (1 + k * (s / R - 1)) where m and
s are the mean and population standard deviation of the local window,
computed exactly from integer summed-area tables. Windows clamp at the
image border instead of padding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import BinaryMask, GrayImage, build_integral, check_image, label_components, window_sums

POLARITIES = ("bright_foreground", "dark_foreground", "auto")


@dataclass(frozen=True)
class SauvolaParams:
    window: int = 31
    k: float = 0.2
    r_dynamic: float = 128.0
    polarity: str = "auto"

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 3, got {self.window}")
        if self.r_dynamic <= 0:
            raise ValueError("r_dynamic must be positive")
        if self.polarity not in POLARITIES:
            raise ValueError(f"polarity must be one of {POLARITIES}")

    def to_dict(self) -> dict:
        return {"window": self.window, "k": self.k,
                "r_dynamic": self.r_dynamic, "polarity": self.polarity}

    @classmethod
    def from_dict(cls, d: dict) -> "SauvolaParams":
        return cls(**d)


def sauvola_threshold(img: GrayImage, p: SauvolaParams) -> np.ndarray:
    """Per-pixel Sauvola threshold map (float64)."""
    img = check_image(img)
    ii = build_integral(img)
    radius = (p.window - 1) // 2
    s, s2, n = window_sums(ii, radius)
    mean = s / n
    # Integer numerator: exact, and never negative up to float division.
    var = (n * s2 - s * s) / (n * n)
    std = np.sqrt(np.maximum(var, 0.0))
    return mean * (1.0 + p.k * (std / p.r_dynamic - 1.0))


def sauvola_mask(img: GrayImage, p: SauvolaParams | None = None) -> BinaryMask:
    """Adaptive-threshold binarization with automatic polarity.

    bright_foreground keeps pixels above the threshold, dark_foreground
    below it. auto computes bright_foreground and complements the result
    if foreground covers strictly more than half the image, on the
    assumption that the structure of interest is the minority region.
    """
    p = p or SauvolaParams()
    img = check_image(img)
    t = sauvola_threshold(img, p)
    if p.polarity == "dark_foreground":
        return img < t
    mask = img > t
    if p.polarity == "auto" and int(mask.sum()) * 2 > mask.size:
        mask = ~mask
    return mask


def fallback_extract(img: GrayImage, p: SauvolaParams | None = None) -> BinaryMask:
    """Full fallback path: Sauvola mask reduced to its largest component.

    Downstream refinement assumes one contiguous structure per image, so
    only the largest 8-connected component survives (ties resolve to the
    component whose first pixel comes earliest in row-major order). An
    image that thresholds to nothing yields a single-pixel mask at the
    first maximum-intensity pixel, so later stages never see emptiness.
    """
    img = check_image(img)
    mask = sauvola_mask(img, p)
    if mask.any():
        lm = label_components(mask, connectivity=8)
        best = 1 + int(np.argmax([st.area for st in lm.stats]))
        return lm.labels == best
    out = np.zeros(img.shape, dtype=bool)
    flat = int(np.argmax(img))
    out[flat // img.shape[1], flat % img.shape[1]] = True
    return out
