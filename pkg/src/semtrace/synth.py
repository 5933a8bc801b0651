"""Deterministic synthetic SEM corpus generator.

Ground-truth layouts (rectangles and simple polygons) are rasterized and
rendered with the imaging artifacts that make real SEM segmentation hard:
brightened edges, blur, additive Gaussian noise, and a global exposure
gain. Every byte of output is a pure function of the generator arguments,
so any sample can be regenerated in isolation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .raster import BinaryMask, GrayImage, check_mask, write_mask_pgm, write_pgm

MANIFEST_SCHEMA_VERSION = 1

_M64 = (1 << 64) - 1
_XS_MULT = 2685821657736338717
_SEED_SCRAMBLE = 0x9E3779B97F4A7C15


class Rng:
    """xorshift64* pseudo-random generator with a 64-bit state.

    Update rule (all arithmetic mod 2**64):

        x ^= x >> 12
        x ^= x << 25
        x ^= x >> 27
        output = x * 2685821657736338717

    The integer stream is exactly reproducible on every platform. Floats
    in [0, 1) take the top 53 bits; Gaussians use the Box-Muller
    transform on top of that stream.
    """

    def __init__(self, seed: int):
        # State must be nonzero; scramble so small seeds diverge immediately.
        self._state = ((seed & _M64) ^ _SEED_SCRAMBLE) or _SEED_SCRAMBLE
        self._spare: float | None = None

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x = (x ^ (x << 25)) & _M64
        x ^= x >> 27
        self._state = x
        return (x * _XS_MULT) & _M64

    def next_float(self) -> float:
        """Uniform in [0, 1)."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def next_gaussian(self) -> float:
        """Standard normal via Box-Muller."""
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        u1 = ((self.next_u64() >> 11) + 1) * (2.0 ** -53)   # (0, 1], log-safe
        u2 = (self.next_u64() >> 11) * (2.0 ** -53)
        r = math.sqrt(-2.0 * math.log(u1))
        theta = 2.0 * math.pi * u2
        self._spare = r * math.sin(theta)
        return r * math.cos(theta)

    def gaussians(self, n: int) -> np.ndarray:
        return np.array([self.next_gaussian() for _ in range(n)], dtype=np.float64)


def derive_seed(master: int, *indices: int) -> int:
    """Mix integer indices into a master seed with the xorshift64* step.

    Each index perturbs the state and one generator step scrambles it, so
    (seed, case, sample) triples map to well-separated substreams.
    """
    rng = Rng(master)
    out = rng.next_u64()
    for v in indices:
        rng._state ^= ((v & _M64) * _XS_MULT + _SEED_SCRAMBLE) & _M64
        out = rng.next_u64()
    return out


def hash_text(text: str) -> int:
    """FNV-1a 64-bit hash, for mixing string identifiers into seeds."""
    h = 0xCBF29CE484222325
    for b in text.encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & _M64
    return h


# ---------------------------------------------------------------------------
# Layouts


@dataclass(frozen=True)
class Rect:
    x: int
    y: int
    w: int
    h: int


@dataclass(frozen=True)
class Polygon:
    vertices: tuple[tuple[float, float], ...]


Shape = Rect | Polygon


@dataclass(frozen=True)
class LayoutSpec:
    width: int
    height: int
    shapes: tuple[Shape, ...] = ()

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("layout canvas must be at least 1x1")
        for s in self.shapes:
            if isinstance(s, Rect):
                ok = 0 <= s.x and 0 <= s.y and s.x + s.w <= self.width and s.y + s.h <= self.height
            else:
                ok = all(0 <= vx <= self.width and 0 <= vy <= self.height for vx, vy in s.vertices)
            if not ok:
                raise ValueError("shape vertices must lie within the canvas")


def rasterize(layout: LayoutSpec) -> BinaryMask:
    """Rasterize a layout: a pixel is foreground iff its center lies inside
    any shape (even-odd rule for polygons)."""
    mask = np.zeros((layout.height, layout.width), dtype=bool)
    for shape in layout.shapes:
        if isinstance(shape, Rect):
            mask[shape.y:shape.y + shape.h, shape.x:shape.x + shape.w] = True
        else:
            _fill_polygon(mask, shape.vertices)
    return mask


def _fill_polygon(mask: np.ndarray, vertices: tuple[tuple[float, float], ...]) -> None:
    # Scanline even-odd fill sampled at pixel centers (x + 0.5, y + 0.5).
    if len(vertices) < 3:
        return
    h, w = mask.shape
    edges = list(zip(vertices, vertices[1:] + vertices[:1]))
    for py in range(h):
        yc = py + 0.5
        xs = []
        for (x1, y1), (x2, y2) in edges:
            if (y1 <= yc < y2) or (y2 <= yc < y1):
                xs.append(x1 + (yc - y1) * (x2 - x1) / (y2 - y1))
        xs.sort()
        for xa, xb in zip(xs[0::2], xs[1::2]):
            lo = max(0, math.ceil(xa - 0.5))
            hi = min(w, math.ceil(xb - 0.5))
            if lo < hi:
                mask[py, lo:hi] = True


# ---------------------------------------------------------------------------
# Rendering


@dataclass(frozen=True)
class SynthParams:
    fg_level: int = 150
    bg_level: int = 60
    bloom_gain: float = 35.0
    blur_sigma: float = 1.0
    noise_sigma: float = 10.0
    exposure_gain: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.fg_level <= 255 and 0 <= self.bg_level <= 255):
            raise ValueError("intensity levels must be in [0, 255]")
        if self.fg_level == self.bg_level:
            raise ValueError("fg_level and bg_level must differ")
        if self.bloom_gain < 0 or self.blur_sigma < 0 or self.noise_sigma < 0:
            raise ValueError("gains and sigmas must be non-negative")
        if not (self.exposure_gain > 0 and math.isfinite(self.exposure_gain)):
            raise ValueError("exposure_gain must be positive and finite")

    def to_dict(self) -> dict:
        return {
            "fg_level": self.fg_level,
            "bg_level": self.bg_level,
            "bloom_gain": self.bloom_gain,
            "blur_sigma": self.blur_sigma,
            "noise_sigma": self.noise_sigma,
            "exposure_gain": self.exposure_gain,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthParams":
        return cls(**d)


def _round_half_up(a: np.ndarray) -> np.ndarray:
    return np.floor(a + 0.5)


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Two-pass separable blur with an integer-quantized kernel.

    Kernel taps are Gaussian weights scaled to 16-bit integers and
    normalized exactly on division, so results are platform-reproducible.
    Borders replicate the edge pixel. Kernel radius is ceil(3 * sigma).
    """
    if sigma <= 0:
        return img.astype(np.int64)
    radius = math.ceil(3.0 * sigma)
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    weights = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    taps = np.maximum(np.round(weights / weights.sum() * 65536.0).astype(np.int64), 0)
    taps[radius] = max(taps[radius], 1)
    total = int(taps.sum())

    def one_pass(a: np.ndarray) -> np.ndarray:
        padded = np.pad(a, ((0, 0), (radius, radius)), mode="edge")
        acc = np.zeros_like(a, dtype=np.int64)
        for i, t in enumerate(taps.tolist()):
            acc += t * padded[:, i:i + a.shape[1]]
        return (acc + total // 2) // total

    out = one_pass(img.astype(np.int64))
    return one_pass(out.T).T


def _boundary_4(mask: np.ndarray) -> np.ndarray:
    # Foreground pixels with at least one in-bounds background 4-neighbor.
    bg = ~mask
    out = np.zeros_like(mask)
    out[:-1, :] |= mask[:-1, :] & bg[1:, :]
    out[1:, :] |= mask[1:, :] & bg[:-1, :]
    out[:, :-1] |= mask[:, :-1] & bg[:, 1:]
    out[:, 1:] |= mask[:, 1:] & bg[:, :-1]
    return out


def render(gt: BinaryMask, params: SynthParams) -> GrayImage:
    """Render a ground-truth mask into a synthetic SEM image.

    Stages: flat foreground/background levels, edge bloom on boundary
    pixels, separable Gaussian blur, additive Gaussian noise from the
    seeded generator, exposure gain, then clamp to [0, 255] with
    round-half-up.
    """
    gt = check_mask(gt)
    h, w = gt.shape
    base = np.where(gt, float(params.fg_level), float(params.bg_level))
    if params.bloom_gain > 0:
        base[_boundary_4(gt)] += params.bloom_gain
    quantized = _round_half_up(base).astype(np.int64)
    blurred = gaussian_blur(quantized, params.blur_sigma).astype(np.float64)
    if params.noise_sigma > 0:
        noise = Rng(params.seed).gaussians(h * w).reshape(h, w)
        blurred += params.noise_sigma * noise
    out = np.clip(blurred * params.exposure_gain, 0.0, 255.0)
    return _round_half_up(out).astype(np.uint8)


# ---------------------------------------------------------------------------
# Corpus generation


@dataclass(frozen=True)
class CorpusRecord:
    id: str
    case_id: str
    image_path: str
    gt_mask_path: str
    params: SynthParams

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "case_id": self.case_id,
            "image_path": self.image_path,
            "gt_mask_path": self.gt_mask_path,
            "params": self.params.to_dict(),
        }


@dataclass(frozen=True)
class CorpusManifest:
    root: Path
    records: tuple[CorpusRecord, ...] = field(default_factory=tuple)

    def by_id(self) -> dict[str, CorpusRecord]:
        return {r.id: r for r in self.records}

    def resolve(self, rel: str) -> Path:
        return self.root / rel


def make_corpus(layouts: list[LayoutSpec], cases: list[SynthParams],
                samples_per_case: int, seed: int, out_dir: str | Path) -> Path:
    """Generate a corpus of (image, ground-truth mask) PGM pairs plus a
    JSON manifest.

    Per-sample seeds derive from (seed, case index, sample index), so any
    sample regenerates identically in isolation. Within a case, samples
    cycle through the layout list.
    """
    if not layouts or not cases:
        raise ValueError("layouts and cases must be non-empty")
    if samples_per_case < 1:
        raise ValueError("samples_per_case must be >= 1")
    out = Path(out_dir)
    images = out / "images"
    masks = out / "masks"
    try:
        images.mkdir(parents=True, exist_ok=True)
        masks.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create corpus directory {out}: {exc}") from exc

    gts = [rasterize(layout) for layout in layouts]
    records: list[CorpusRecord] = []
    for ci, case in enumerate(cases):
        case_id = f"case{ci + 1:02d}"
        for si in range(samples_per_case):
            sample_id = f"{case_id}_s{si + 1:03d}"
            params = replace(case, seed=derive_seed(seed, ci, si))
            gt = gts[si % len(gts)]
            img = render(gt, params)
            image_rel = f"images/{sample_id}.pgm"
            mask_rel = f"masks/{sample_id}.gt.pgm"
            try:
                write_pgm(out / image_rel, img)
                write_mask_pgm(out / mask_rel, gt)
            except OSError as exc:
                raise OSError(f"cannot write corpus sample {out / image_rel}: {exc}") from exc
            records.append(CorpusRecord(id=sample_id, case_id=case_id,
                                        image_path=image_rel, gt_mask_path=mask_rel,
                                        params=params))

    manifest_path = out / "manifest.json"
    doc = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "records": [r.to_dict() for r in records],
    }
    manifest_path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return manifest_path


def load_manifest(path: str | Path) -> CorpusManifest:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise OSError(f"cannot read corpus manifest {path}: {exc}") from exc
    if doc.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported manifest schema {doc.get('schema_version')!r}")
    records = tuple(
        CorpusRecord(id=r["id"], case_id=r["case_id"], image_path=r["image_path"],
                     gt_mask_path=r["gt_mask_path"], params=SynthParams.from_dict(r["params"]))
        for r in doc["records"]
    )
    return CorpusManifest(root=path.parent, records=records)


# ---------------------------------------------------------------------------
# Built-in layouts and exposure cases


def default_layouts(width: int = 96, height: int = 96) -> list[LayoutSpec]:
    """Chunky single-structure layouts sized for a 96x96 canvas.

    Structures keep enough bulk that one-pixel erosions, dilations, and
    shifts stay near 0.9 IoU against the original. The pinched layout
    joins two pads with a narrow bridge, the classic shape that
    threshold-based extraction severs under noise.
    """
    if width < 32 or height < 32:
        raise ValueError("default layouts need at least a 32x32 canvas")
    cx, cy = width // 2, height // 2

    def u(v: int) -> int:
        # Dimensions are tuned on a 96x96 canvas and scale with the short side.
        return max(1, round(v * min(width, height) / 96))

    octagon = Polygon((
        (cx - u(12), cy - u(26)), (cx + u(12), cy - u(26)), (cx + u(26), cy - u(12)),
        (cx + u(26), cy + u(12)), (cx + u(12), cy + u(26)), (cx - u(12), cy + u(26)),
        (cx - u(26), cy + u(12)), (cx - u(26), cy - u(12)),
    ))
    pinched_h = LayoutSpec(width, height, (
        Rect(cx - u(40), cy - u(22), u(34), u(44)),
        Rect(cx + u(6), cy - u(22), u(34), u(44)),
        Rect(cx - u(8), cy - u(3), u(16), u(5)),
    ))
    pinched_v = LayoutSpec(width, height, (
        Rect(cx - u(22), cy - u(40), u(44), u(34)),
        Rect(cx - u(22), cy + u(6), u(44), u(34)),
        Rect(cx - u(3), cy - u(8), u(5), u(16)),
    ))
    pinched_wide = LayoutSpec(width, height, (
        Rect(cx - u(40), cy - u(24), u(34), u(48)),
        Rect(cx + u(6), cy - u(24), u(34), u(48)),
        Rect(cx - u(8), cy - u(4), u(16), u(7)),
    ))
    return [
        LayoutSpec(width, height, (Rect(cx - u(20), cy - u(28), u(40), u(56)),)),
        LayoutSpec(width, height, (octagon,)),
        pinched_h,
        pinched_v,
        pinched_wide,
    ]


# One row per imaging condition: (bloom, blur, noise, exposure). The ladder
# spans benign through extreme noise and under/over-exposure; from the
# third case on, blur is strong enough that narrow features hover near the
# local threshold and traditional extraction turns erratic.
_DEFAULT_CASE_TABLE = [
    (20.0, 3.0, 10.0, 1.00),
    (35.0, 1.5, 15.0, 0.90),
    (15.0, 3.0, 15.0, 1.10),
    (15.0, 3.0, 20.0, 0.80),
    (20.0, 3.0, 20.0, 1.20),
    (25.0, 3.0, 25.0, 0.70),
    (15.0, 3.0, 25.0, 1.50),
    (20.0, 3.0, 40.0, 0.60),
    (20.0, 3.0, 35.0, 2.00),
    (20.0, 3.0, 80.0, 0.50),
]


def default_cases(n: int = 10) -> list[SynthParams]:
    """The built-in imaging-condition ladder; cycles past 10 if asked."""
    if n < 1:
        raise ValueError("need at least one case")
    out = []
    for i in range(n):
        bloom, blur, noise, exposure = _DEFAULT_CASE_TABLE[i % len(_DEFAULT_CASE_TABLE)]
        out.append(SynthParams(fg_level=150, bg_level=0, bloom_gain=bloom,
                               blur_sigma=blur, noise_sigma=noise,
                               exposure_gain=exposure, seed=0))
    return out
