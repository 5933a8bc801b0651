"""Pipeline orchestration: candidates -> gate -> (selection | fallback) ->
refinement -> contour extraction, with the guarantee that every readable
image yields at least one contour.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .gate import GateConfig, GateReport, gate_config_from_reference, select_candidate
from .metrics import confusion, epe, exposure_score, f1, iou, precision, recall
from .raster import BinaryMask, GrayImage, read_mask_pgm, read_pgm, write_mask_pgm
from .refine import Contour, StructuringElement, contour_point_set, extract_contours, fill_holes, morph_close, write_contours_json
from .providers import DirectoryProvider, NullProvider, OracleConfig, OracleProvider
from .sauvola import SauvolaParams, fallback_extract
from .synth import CorpusManifest, load_manifest

RESULTS_FILENAME = "results.jsonl"


@dataclass(frozen=True)
class ProviderConfig:
    kind: str = "null"                      # null | oracle | directory
    candidates_root: str | None = None
    oracle: OracleConfig = field(default_factory=OracleConfig)

    def __post_init__(self):
        if self.kind not in ("null", "oracle", "directory"):
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.kind == "directory" and not self.candidates_root:
            raise ValueError("directory provider needs candidates_root")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "candidates_root": self.candidates_root,
                "oracle": self.oracle.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "ProviderConfig":
        d = dict(d)
        if "oracle" in d:
            d["oracle"] = OracleConfig.from_dict(d["oracle"])
        return cls(**d)


@dataclass(frozen=True)
class PipelineConfig:
    gate: GateConfig = field(default_factory=GateConfig)
    sauvola: SauvolaParams = field(default_factory=SauvolaParams)
    se: StructuringElement = field(default_factory=StructuringElement)
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    gate_from_gt: bool = True    # derive area/aspect ranges from gt when available

    def to_dict(self) -> dict:
        return {"gate": self.gate.to_dict(), "sauvola": self.sauvola.to_dict(),
                "se": self.se.to_dict(), "provider": self.provider.to_dict(),
                "gate_from_gt": self.gate_from_gt}

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        kwargs = {}
        if "gate" in d:
            kwargs["gate"] = GateConfig.from_dict(d["gate"])
        if "sauvola" in d:
            kwargs["sauvola"] = SauvolaParams.from_dict(d["sauvola"])
        if "se" in d:
            kwargs["se"] = StructuringElement.from_dict(d["se"])
        if "provider" in d:
            kwargs["provider"] = ProviderConfig.from_dict(d["provider"])
        if "gate_from_gt" in d:
            kwargs["gate_from_gt"] = bool(d["gate_from_gt"])
        return cls(**kwargs)


def build_provider(cfg: ProviderConfig, corpus: CorpusManifest | None = None):
    if cfg.kind == "null":
        return NullProvider()
    if cfg.kind == "directory":
        return DirectoryProvider(candidates_root=Path(cfg.candidates_root))
    if corpus is None:
        raise ValueError("oracle provider needs a corpus manifest")
    return OracleProvider(cfg=cfg.oracle, corpus=corpus)


@dataclass(frozen=True)
class PipelineResult:
    image_id: str
    source: str                          # "sam2" | "fallback"
    final_mask: BinaryMask
    contours: list[Contour]
    gate_reports: list[GateReport]
    selected_candidate_id: str | None
    wall_time_ms: float


def process_image(image_id: str, img: GrayImage, cfg: PipelineConfig, provider) -> PipelineResult:
    """Run the full per-image pipeline.

    Candidates are fetched and gated; the winner (or the adaptive-threshold
    fallback when nothing passes) is refined by closing plus hole filling,
    and contours are traced from the refined mask. The result always
    carries at least one contour.
    """
    t0 = time.perf_counter()
    try:
        candidates = provider.candidates_for(image_id, img)
    except (OSError, ValueError, KeyError) as exc:
        raise RuntimeError(f"candidate provider failed for image {image_id!r}: {exc}") from exc
    selection, reports = select_candidate(candidates, cfg.gate)
    if selection is not None:
        mask, source, selected_id = selection[0].mask, "sam2", selection[0].candidate_id
    else:
        mask, source, selected_id = fallback_extract(img, cfg.sauvola), "fallback", None
    final = fill_holes(morph_close(mask, cfg.se))
    contours = extract_contours(final)
    wall_ms = (time.perf_counter() - t0) * 1000.0
    return PipelineResult(image_id=image_id, source=source, final_mask=final,
                          contours=contours, gate_reports=reports,
                          selected_candidate_id=selected_id, wall_time_ms=wall_ms)


def _metrics_against_gt(result: PipelineResult, gt: BinaryMask, img: GrayImage) -> dict:
    c = confusion(result.final_mask, gt)
    h, w = gt.shape
    diagonal = (w * w + h * h) ** 0.5
    gt_boundary = contour_point_set(extract_contours(gt))
    pred_boundary = contour_point_set(result.contours)
    e = epe(pred_boundary, gt_boundary, empty_distance=diagonal)
    return {
        "iou": iou(c), "precision": precision(c), "recall": recall(c), "f1": f1(c),
        "mean_epe": e.mean_epe, "max_epe": e.max_epe,
        "exposure_score": exposure_score(img),
    }


def _record_for(index: int, manifest: CorpusManifest, cfg: PipelineConfig,
                gt_available: bool, provider) -> dict:
    """Worker body: process one manifest record into a result dict."""
    record = manifest.records[index]
    try:
        img = read_pgm(manifest.resolve(record.image_path))
    except (OSError, ValueError) as exc:
        return {"image_id": record.id, "case_id": record.case_id,
                "failed": True, "reason": str(exc)}

    gate_cfg = cfg.gate
    gt = None
    if gt_available:
        try:
            gt = read_mask_pgm(manifest.resolve(record.gt_mask_path))
        except (OSError, ValueError) as exc:
            return {"image_id": record.id, "case_id": record.case_id,
                    "failed": True, "reason": str(exc)}
        if cfg.gate_from_gt:
            gate_cfg = gate_config_from_reference(gt, cfg.gate)

    try:
        result = process_image(record.id, img, replace(cfg, gate=gate_cfg), provider)
    except RuntimeError as exc:
        return {"image_id": record.id, "case_id": record.case_id,
                "failed": True, "reason": str(exc)}

    out = {
        "image_id": record.id,
        "case_id": record.case_id,
        "source": result.source,
        "selected_candidate_id": result.selected_candidate_id,
        "gate_reports": [r.to_dict() for r in result.gate_reports],
        "wall_time_ms": result.wall_time_ms,
        "contour_path": f"contours/{record.id}.contours.json",
        "mask_path": f"masks/{record.id}.final.pgm",
        "_final_mask": result.final_mask,
        "_contours": result.contours,
    }
    if gt is not None:
        out["metrics"] = _metrics_against_gt(result, gt, img)
    return out


# Module-level state for process-pool workers (set once per worker).
_WORKER_STATE: dict = {}


def _worker_init(manifest_path: str, cfg_dict: dict, gt_available: bool) -> None:
    manifest = load_manifest(manifest_path)
    cfg = PipelineConfig.from_dict(cfg_dict)
    _WORKER_STATE["manifest"] = manifest
    _WORKER_STATE["cfg"] = cfg
    _WORKER_STATE["gt_available"] = gt_available
    _WORKER_STATE["provider"] = build_provider(cfg.provider, corpus=manifest)


def _worker_run(index: int) -> dict:
    return _record_for(index, _WORKER_STATE["manifest"], _WORKER_STATE["cfg"],
                       _WORKER_STATE["gt_available"], _WORKER_STATE["provider"])


@dataclass(frozen=True)
class BatchResult:
    results_path: Path
    processed: int
    failed: int
    fallback_used: int
    batch_wall_time_ms: float


def run_batch(manifest: CorpusManifest | str | Path, out_dir: str | Path,
              cfg: PipelineConfig, gt_available: bool = True,
              workers: int = 1) -> BatchResult:
    """Process every corpus record and write one result file.

    Per-image records land in `results.jsonl` in manifest order, each
    pointing at its traced contours and refined mask on disk. Unreadable
    samples become failure records; the batch continues.
    """
    if not isinstance(manifest, CorpusManifest):
        manifest = load_manifest(manifest)
    out = Path(out_dir)
    (out / "contours").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    indices = range(len(manifest.records))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_worker_init,
                                 initargs=(str(manifest.root / "manifest.json"),
                                           cfg.to_dict(), gt_available)) as pool:
            records = list(pool.map(_worker_run, indices))
    else:
        provider = build_provider(cfg.provider, corpus=manifest)
        records = [_record_for(i, manifest, cfg, gt_available, provider) for i in indices]
    batch_ms = (time.perf_counter() - t0) * 1000.0

    fallback_used = 0
    failed = 0
    results_path = out / RESULTS_FILENAME
    with open(results_path, "w", encoding="utf-8") as f:
        for rec in records:
            if rec.get("failed"):
                failed += 1
            else:
                if rec["source"] == "fallback":
                    fallback_used += 1
                write_mask_pgm(out / rec["mask_path"], rec.pop("_final_mask"))
                write_contours_json(out / rec["contour_path"], rec.pop("_contours"))
            f.write(json.dumps(rec) + "\n")

    run_meta = {"config": cfg.to_dict(), "gt_available": gt_available,
                "images": len(records), "failed": failed,
                "fallback_used": fallback_used, "batch_wall_time_ms": batch_ms}
    (out / "run.json").write_text(json.dumps(run_meta, indent=2) + "\n", encoding="utf-8")
    return BatchResult(results_path=results_path, processed=len(records) - failed,
                       failed=failed, fallback_used=fallback_used,
                       batch_wall_time_ms=batch_ms)


def read_results(path: str | Path) -> list[dict]:
    """Load a results.jsonl file into a list of record dicts."""
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out
