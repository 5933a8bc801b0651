"""Raster primitives shared by every pipeline stage.

Conventions used throughout the package:

* a grayscale image ("GrayImage") is a 2-D ``uint8`` numpy array, shape
  ``(height, width)``, indexed ``[y, x]``;
* a binary mask ("BinaryMask") is a 2-D ``bool`` array of the same layout;
* points are ``(x, y)`` pairs in pixel coordinates, y growing downward.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from pathlib import Path

import numpy as np

GrayImage = np.ndarray
BinaryMask = np.ndarray


def check_image(img: np.ndarray) -> GrayImage:
    """Validate and return an 8-bit grayscale image array."""
    arr = np.asarray(img)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"image must be 2-D and non-empty, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if not (np.issubdtype(arr.dtype, np.integer) and arr.min() >= 0 and arr.max() <= 255):
            raise ValueError("image values must be integers in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


def check_mask(mask: np.ndarray) -> BinaryMask:
    """Validate and return a boolean mask array."""
    arr = np.asarray(mask)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"mask must be 2-D and non-empty, got shape {arr.shape}")
    if arr.dtype != bool:
        arr = arr.astype(bool)
    return arr


# ---------------------------------------------------------------------------
# Integral images


@dataclass(frozen=True)
class IntegralImage:
    """Summed-area tables for O(1) windowed statistics.

    ``sums[y, x]`` (and ``sq_sums``) hold the exact integer sum (sum of
    squares) of all pixels in the half-open rectangle [0, x) x [0, y);
    row 0 and column 0 are therefore zero.
    """

    sums: np.ndarray      # int64, (h + 1, w + 1)
    sq_sums: np.ndarray   # int64, (h + 1, w + 1)

    @property
    def width(self) -> int:
        return self.sums.shape[1] - 1

    @property
    def height(self) -> int:
        return self.sums.shape[0] - 1


def build_integral(img: GrayImage) -> IntegralImage:
    """Build exact integer summed-area tables for an image."""
    img = check_image(img)
    h, w = img.shape
    a = img.astype(np.int64)
    sums = np.zeros((h + 1, w + 1), dtype=np.int64)
    sq = np.zeros((h + 1, w + 1), dtype=np.int64)
    np.cumsum(np.cumsum(a, axis=0), axis=1, out=sums[1:, 1:])
    np.cumsum(np.cumsum(a * a, axis=0), axis=1, out=sq[1:, 1:])
    return IntegralImage(sums=sums, sq_sums=sq)


def window_sums(ii: IntegralImage, radius: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-pixel clipped-window sums.

    Returns ``(sums, sq_sums, counts)`` arrays where entry ``[y, x]``
    covers the square window of the given radius centered on ``(x, y)``
    and clamped to the image bounds (no padding).
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    w, h = ii.width, ii.height
    ys = np.arange(h)
    xs = np.arange(w)
    y0 = np.clip(ys - radius, 0, h - 1)
    y1 = np.clip(ys + radius, 0, h - 1)
    x0 = np.clip(xs - radius, 0, w - 1)
    x1 = np.clip(xs + radius, 0, w - 1)
    counts = np.multiply.outer(y1 - y0 + 1, x1 - x0 + 1).astype(np.int64)

    def rect(table: np.ndarray) -> np.ndarray:
        return (table[np.ix_(y1 + 1, x1 + 1)] - table[np.ix_(y0, x1 + 1)]
                - table[np.ix_(y1 + 1, x0)] + table[np.ix_(y0, x0)])

    return rect(ii.sums), rect(ii.sq_sums), counts


def window_stats(ii: IntegralImage, cx: int, cy: int, radius: int) -> tuple[float, float]:
    """Mean and population standard deviation of the clipped window at (cx, cy)."""
    if not (0 <= cx < ii.width and 0 <= cy < ii.height):
        raise ValueError(f"window center ({cx}, {cy}) outside {ii.width}x{ii.height} image")
    if radius < 1:
        raise ValueError("radius must be >= 1")
    x0 = max(0, cx - radius)
    x1 = min(ii.width - 1, cx + radius)
    y0 = max(0, cy - radius)
    y1 = min(ii.height - 1, cy + radius)
    n = (x1 - x0 + 1) * (y1 - y0 + 1)
    s = int(ii.sums[y1 + 1, x1 + 1] - ii.sums[y0, x1 + 1] - ii.sums[y1 + 1, x0] + ii.sums[y0, x0])
    s2 = int(ii.sq_sums[y1 + 1, x1 + 1] - ii.sq_sums[y0, x1 + 1]
             - ii.sq_sums[y1 + 1, x0] + ii.sq_sums[y0, x0])
    mean = s / n
    # Exact integer numerator keeps the variance non-negative and reproducible.
    var = (n * s2 - s * s) / (n * n)
    return mean, float(np.sqrt(max(var, 0.0)))


# ---------------------------------------------------------------------------
# Connected components


@dataclass(frozen=True)
class RegionStats:
    """Per-component geometry: pixel area, bounding box, sub-pixel centroid."""

    area: int
    min_x: int
    min_y: int
    max_x: int
    max_y: int
    centroid_x: float
    centroid_y: float

    @property
    def bbox_width(self) -> int:
        return self.max_x - self.min_x + 1

    @property
    def bbox_height(self) -> int:
        return self.max_y - self.min_y + 1

    @property
    def aspect(self) -> float:
        """Bounding-box width over height (both at least one pixel)."""
        return self.bbox_width / self.bbox_height


@dataclass(frozen=True)
class LabelMap:
    """Connected-component labeling: 0 is background, labels run 1..component_count."""

    labels: np.ndarray          # int32, (h, w)
    component_count: int
    stats: tuple[RegionStats, ...]   # stats[i] describes label i + 1

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


def label_components(mask: BinaryMask, connectivity: int = 8) -> LabelMap:
    """Label connected foreground components with union-find over row runs.

    Runs of consecutive foreground pixels are merged across adjacent rows
    (touching for 8-connectivity, overlapping for 4), then resolved with
    path compression. Labels are assigned in row-major order of each
    component's first pixel, so the result is scan-order deterministic.
    """
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    mask = check_mask(mask)
    h, w = mask.shape

    parent: list[int] = []

    def find(i: int) -> int:
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    reach = 1 if connectivity == 8 else 0
    all_runs: list[tuple[int, int, int, int]] = []   # (y, x0, x1) half-open + run id
    prev_runs: list[tuple[int, int, int]] = []
    for y in range(h):
        d = np.diff(mask[y].astype(np.int8), prepend=0, append=0)
        starts = np.flatnonzero(d == 1)
        ends = np.flatnonzero(d == -1)
        prev_ends = [r[1] for r in prev_runs]
        cur: list[tuple[int, int, int]] = []
        for x0, x1 in zip(starts.tolist(), ends.tolist()):
            rid = len(parent)
            parent.append(rid)
            cur.append((x0, x1, rid))
            all_runs.append((y, x0, x1, rid))
            # Runs in the previous row with end > x0 - reach and start < x1 + reach.
            k = bisect.bisect_right(prev_ends, x0 - reach)
            while k < len(prev_runs) and prev_runs[k][0] < x1 + reach:
                union(prev_runs[k][2], rid)
                k += 1
        prev_runs = cur

    labels = np.zeros((h, w), dtype=np.int32)
    root_to_label: dict[int, int] = {}
    acc: list[list[float]] = []   # area, sum_x, sum_y, min_x, min_y, max_x, max_y
    for y, x0, x1, rid in all_runs:
        root = find(rid)
        lab = root_to_label.get(root)
        if lab is None:
            lab = len(root_to_label) + 1
            root_to_label[root] = lab
            acc.append([0, 0.0, 0.0, w, h, -1, -1])
        labels[y, x0:x1] = lab
        a = acc[lab - 1]
        n = x1 - x0
        a[0] += n
        a[1] += (x0 + x1 - 1) * n / 2.0
        a[2] += y * n
        a[3] = min(a[3], x0)
        a[4] = min(a[4], y)
        a[5] = max(a[5], x1 - 1)
        a[6] = max(a[6], y)

    stats = tuple(
        RegionStats(area=int(a[0]), min_x=int(a[3]), min_y=int(a[4]),
                    max_x=int(a[5]), max_y=int(a[6]),
                    centroid_x=a[1] / a[0], centroid_y=a[2] / a[0])
        for a in acc
    )
    return LabelMap(labels=labels, component_count=len(stats), stats=stats)


# ---------------------------------------------------------------------------
# PGM serialization (binary P5, maxval 255)


def _read_pgm_header(data: bytes, path: Path) -> tuple[int, int, int]:
    # Tokenize magic / width / height / maxval, skipping '#' comments.
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < 4 and i < len(data):
        c = data[i:i + 1]
        if c == b"#":
            while i < len(data) and data[i:i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
                j += 1
            tokens.append(data[i:j])
            i = j
    if len(tokens) < 4 or tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    try:
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise ValueError(f"{path}: malformed PGM header") from exc
    if w < 1 or h < 1:
        raise ValueError(f"{path}: invalid dimensions {w}x{h}")
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval} (must be 255)")
    return w, h, i + 1   # header ends with a single whitespace byte


def read_pgm(path: str | Path) -> GrayImage:
    """Read a binary PGM (P5, maxval 255) grayscale image."""
    path = Path(path)
    data = path.read_bytes()
    w, h, offset = _read_pgm_header(data, path)
    raster = data[offset:offset + w * h]
    if len(raster) != w * h:
        raise ValueError(f"{path}: truncated raster ({len(raster)} of {w * h} bytes)")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w).copy()


def write_pgm(path: str | Path, img: GrayImage) -> None:
    """Write a grayscale image as binary PGM (P5, maxval 255)."""
    img = check_image(img)
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def read_mask_pgm(path: str | Path) -> BinaryMask:
    """Read a mask PGM; every pixel must be 0 or 255."""
    img = read_pgm(path)
    bad = (img != 0) & (img != 255)
    if bad.any():
        raise ValueError(f"{path}: mask contains values other than 0/255")
    return img == 255


def write_mask_pgm(path: str | Path, mask: BinaryMask) -> None:
    """Write a mask as 0/255 binary PGM."""
    mask = check_mask(mask)
    write_pgm(path, np.where(mask, 255, 0).astype(np.uint8))
