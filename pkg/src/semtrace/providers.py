"""Candidate-mask providers: the replaceable source of scored segmentation
hypotheses the pipeline consumes.

Three implementations share one behavioral contract
(``candidates_for(image_id, img) -> list[ScoredMask]``):

* DirectoryProvider reads candidates exported by an external model through
  the on-disk interchange format;
* OracleProvider synthesizes candidates by perturbing ground truth, a
  deterministic test double for a real segmentation model;
* NullProvider returns nothing, forcing the fallback path everywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gate import ScoredMask
from .metrics import mask_iou
from .raster import BinaryMask, GrayImage, label_components, read_mask_pgm, write_mask_pgm
from .refine import StructuringElement, dilate, erode
from .synth import CorpusManifest, Rng, derive_seed, hash_text

CANDIDATES_SCHEMA_VERSION = 1


def candidates_filename(image_id: str) -> str:
    return f"{image_id}.candidates.json"


def write_candidates(root: str | Path, image_id: str,
                     candidates: list[tuple[BinaryMask, float]]) -> Path:
    """Write the interchange manifest and 0/255 mask PGMs for one image."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, (mask, score) in enumerate(candidates):
        mask_rel = f"{image_id}.cand{i}.pgm"
        write_mask_pgm(root / mask_rel, mask)
        entries.append({"mask_path": mask_rel, "predicted_iou": float(score)})
    doc = {"schema_version": CANDIDATES_SCHEMA_VERSION, "image_id": image_id,
           "candidates": entries}
    path = root / candidates_filename(image_id)
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return path


class NullProvider:
    """Always returns no candidates; the pipeline falls back on every image."""

    def candidates_for(self, image_id: str, img: GrayImage) -> list[ScoredMask]:
        return []


@dataclass(frozen=True)
class DirectoryProvider:
    """Reads `<image_id>.candidates.json` manifests and their mask PGMs.

    A missing manifest means "no candidates" (fallback); a malformed
    manifest or a mask that does not match the image dimensions is an
    error that names the offending file.
    """

    candidates_root: Path

    def candidates_for(self, image_id: str, img: GrayImage) -> list[ScoredMask]:
        manifest = Path(self.candidates_root) / candidates_filename(image_id)
        if not manifest.exists():
            return []
        try:
            doc = json.loads(manifest.read_text(encoding="utf-8"))
            entries = doc["candidates"]
            if doc.get("schema_version") != CANDIDATES_SCHEMA_VERSION:
                raise KeyError("schema_version")
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValueError(f"{manifest}: malformed candidate manifest ({exc})") from exc
        out = []
        for i, entry in enumerate(entries):
            try:
                mask_path = manifest.parent / entry["mask_path"]
                score = float(entry["predicted_iou"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{manifest}: malformed candidate entry {i} ({exc})") from exc
            mask = read_mask_pgm(mask_path)
            if mask.shape != img.shape:
                raise ValueError(
                    f"{mask_path}: candidate mask is {mask.shape[1]}x{mask.shape[0]}, "
                    f"image is {img.shape[1]}x{img.shape[0]}")
            out.append(ScoredMask(mask=mask, predicted_iou=score, candidate_id=f"c{i}"))
        return out


@dataclass(frozen=True)
class OracleConfig:
    """Configuration for the ground-truth-perturbing test double.

    Perturbations are compact strings: "none", "erode:N", "dilate:N",
    "translate:DX,DY", "split:GAP", "flip_noise:P". score_mode is
    "true_iou" (actual IoU against ground truth) or "fixed:V".
    """

    perturbations: tuple[str, ...] = ("none",)
    score_mode: str = "true_iou"
    fail_probability: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.fail_probability <= 1.0):
            raise ValueError("fail_probability must be in [0, 1]")
        for p in self.perturbations:
            _parse_perturbation(p)
        _parse_score_mode(self.score_mode)

    def to_dict(self) -> dict:
        return {"perturbations": list(self.perturbations), "score_mode": self.score_mode,
                "fail_probability": self.fail_probability, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "OracleConfig":
        d = dict(d)
        d["perturbations"] = tuple(d.get("perturbations", ("none",)))
        return cls(**d)


def _parse_perturbation(spec: str) -> tuple[str, tuple]:
    kind, _, arg = spec.partition(":")
    try:
        if kind == "none":
            return kind, ()
        if kind in ("erode", "dilate"):
            n = int(arg)
            if n < 1:
                raise ValueError
            return kind, (n,)
        if kind == "translate":
            dx, dy = (int(v) for v in arg.split(","))
            return kind, (dx, dy)
        if kind == "split":
            gap = int(arg)
            if gap < 1:
                raise ValueError
            return kind, (gap,)
        if kind == "flip_noise":
            p = float(arg)
            if not 0.0 <= p <= 1.0:
                raise ValueError
            return kind, (p,)
    except ValueError:
        pass
    raise ValueError(f"unknown or malformed perturbation {spec!r}")


def _parse_score_mode(mode: str) -> tuple[str, float | None]:
    if mode == "true_iou":
        return "true_iou", None
    kind, _, arg = mode.partition(":")
    if kind == "fixed":
        try:
            v = float(arg)
        except ValueError:
            v = -1.0
        if 0.0 <= v <= 1.0:
            return "fixed", v
    raise ValueError(f"unknown score mode {mode!r}")


def translate_mask(mask: BinaryMask, dx: int, dy: int) -> BinaryMask:
    out = np.zeros_like(mask)
    h, w = mask.shape
    ys = slice(max(dy, 0), h + min(dy, 0))
    xs = slice(max(dx, 0), w + min(dx, 0))
    out[ys, xs] = mask[slice(max(-dy, 0), h + min(-dy, 0)), slice(max(-dx, 0), w + min(-dx, 0))]
    return out


def split_mask(mask: BinaryMask, gap: int) -> BinaryMask:
    """Cut a horizontal band of `gap` rows through the foreground centroid.

    Falls back to two corner blobs when the cut does not leave at least
    two fragments, so the result never has a single component.
    """
    out = mask.copy()
    ys, xs = mask.nonzero()
    if len(ys) > 0:
        mid = int(np.round(ys.mean()))
        out[max(0, mid - gap // 2):max(0, mid - gap // 2) + gap, :] = False
    if label_components(out, connectivity=8).component_count < 2:
        out = np.zeros_like(mask)
        h, w = mask.shape
        out[0:min(3, h), 0:min(3, w)] = True
        out[max(0, h - 3):h, max(0, w - 3):w] = True
    return out


def apply_perturbation(gt: BinaryMask, spec: str, rng: Rng) -> BinaryMask:
    kind, args = _parse_perturbation(spec)
    if kind == "none":
        return gt.copy()
    if kind in ("erode", "dilate"):
        op = erode if kind == "erode" else dilate
        se = StructuringElement(3, "square")
        out = gt
        for _ in range(args[0]):
            out = op(out, se)
        return out
    if kind == "translate":
        return translate_mask(gt, *args)
    if kind == "split":
        return split_mask(gt, args[0])
    # flip_noise: flip each pixel independently with probability p
    p = args[0]
    noise = np.array([rng.next_float() < p for _ in range(gt.size)], dtype=bool)
    return gt ^ noise.reshape(gt.shape)


@dataclass(frozen=True)
class OracleProvider:
    """Synthesizes candidates from the corpus ground truth.

    The per-image failure decision draws from its own seed substream, so
    changing the perturbation list never changes which images fail. In
    failure mode only gate-rejectable (split) candidates are emitted.
    """

    cfg: OracleConfig
    corpus: CorpusManifest
    _gt_cache: dict = field(default_factory=dict, compare=False)
    _index: dict = field(default_factory=dict, compare=False)

    def _gt_for(self, image_id: str) -> BinaryMask:
        if image_id not in self._gt_cache:
            if not self._index:
                self._index.update(self.corpus.by_id())
            record = self._index.get(image_id)
            if record is None:
                raise KeyError(f"unknown image id {image_id!r} in corpus")
            self._gt_cache[image_id] = read_mask_pgm(self.corpus.resolve(record.gt_mask_path))
        return self._gt_cache[image_id]

    def candidates_for(self, image_id: str, img: GrayImage) -> list[ScoredMask]:
        gt = self._gt_for(image_id)
        id_hash = hash_text(image_id)
        fail_rng = Rng(derive_seed(self.cfg.seed, id_hash, 1))
        perturb_rng = Rng(derive_seed(self.cfg.seed, id_hash, 2))
        mode, fixed = _parse_score_mode(self.cfg.score_mode)

        if fail_rng.next_float() < self.cfg.fail_probability:
            specs = ["split:2"]
        else:
            specs = list(self.cfg.perturbations)

        out = []
        for i, spec in enumerate(specs):
            mask = apply_perturbation(gt, spec, perturb_rng)
            score = mask_iou(mask, gt) if mode == "true_iou" else fixed
            out.append(ScoredMask(mask=mask, predicted_iou=float(score),
                                  candidate_id=f"c{i}"))
        return out
