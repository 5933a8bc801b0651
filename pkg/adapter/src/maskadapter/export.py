"""Candidate export in the pipeline interchange format.

For each grayscale PGM in the input directory, the model runs with a
centered point prompt (single-structure imagery centers the feature; the
prompt is configurable) and its candidate masks land next to a
`<image_id>.candidates.json` manifest. Raw pixels go straight to the
model, no blurring or denoising. Files are written to a temporary name
and renamed, so readers never observe partial output; an image whose
inference fails gets no manifest at all, which routes it to the
pipeline's fallback.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import torch

from .model import PromptSegNet, load_checkpoint
from .pgm import read_pgm, write_mask

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class AdapterConfig:
    checkpoint: str
    candidates_per_image: int = 3
    device: str = "cpu"
    export_root: str = "exported"
    prompt: tuple[int, int] | None = None   # None: image center

    def __post_init__(self):
        if self.candidates_per_image < 1:
            raise ValueError("candidates_per_image must be >= 1")


@dataclass(frozen=True)
class ExportResult:
    exported: list[str]
    failed: list[str]


def export_image(model: PromptSegNet, image_id: str, image, cfg: AdapterConfig,
                 root: Path) -> None:
    h, w = image.shape
    tensor = torch.from_numpy(image).to(cfg.device, torch.float32)[None, None] / 255.0
    point = cfg.prompt or (w // 2, h // 2)
    with torch.no_grad():
        logits, iou_pred = model(tensor, torch.tensor([point], dtype=torch.float32,
                                                      device=cfg.device))
    n = min(cfg.candidates_per_image, logits.shape[1])
    entries = []
    for i in range(n):
        mask = (torch.sigmoid(logits[0, i]) > 0.5).cpu().numpy()
        score = float(iou_pred[0, i].clamp(0.0, 1.0))
        mask_name = f"{image_id}.cand{i}.pgm"
        tmp_mask = root / (mask_name + ".tmp")
        write_mask(tmp_mask, mask)
        tmp_mask.rename(root / mask_name)
        entries.append({"mask_path": mask_name, "predicted_iou": score})
    doc = {"schema_version": SCHEMA_VERSION, "image_id": image_id,
           "candidates": entries}
    tmp = root / f"{image_id}.candidates.json.tmp"
    tmp.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    tmp.rename(root / f"{image_id}.candidates.json")


def export_candidates(images_dir: str | Path, cfg: AdapterConfig) -> ExportResult:
    """Export scored candidates for every PGM image in a directory.

    A model that cannot load aborts the export; a single image whose
    inference fails is skipped (no manifest) and reported in the result.
    """
    model = load_checkpoint(cfg.checkpoint)
    model.to(cfg.device)
    root = Path(cfg.export_root)
    root.mkdir(parents=True, exist_ok=True)
    exported: list[str] = []
    failed: list[str] = []
    for path in sorted(Path(images_dir).glob("*.pgm")):
        image_id = path.stem
        try:
            image = read_pgm(path)
            export_image(model, image_id, image, cfg, root)
            exported.append(image_id)
        except Exception as exc:   # per-image isolation: fallback downstream
            log.warning("export failed for %s: %s", image_id, exc)
            failed.append(image_id)
    return ExportResult(exported=exported, failed=failed)
