"""Aggregation of batch results into per-case statistics and side-by-side
comparison tables (baseline run vs hybrid run).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

from .pipeline import read_results
from .synth import CorpusManifest, load_manifest

log = logging.getLogger(__name__)

METRIC_KEYS = ("iou", "precision", "recall", "f1")


@dataclass(frozen=True)
class MetricStat:
    mean: float
    std: float

    def format(self) -> str:
        return f"{self.mean:.3f} ±{self.std:.3f}"


@dataclass(frozen=True)
class CaseReport:
    case_id: str
    avg_exposure: float
    sample_count: int
    metrics: dict[str, MetricStat]
    avg_wall_time_ms: float
    fallback_used: int

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "avg_exposure": self.avg_exposure,
            "sample_count": self.sample_count,
            "metrics": {k: {"mean": v.mean, "std": v.std} for k, v in self.metrics.items()},
            "avg_wall_time_ms": self.avg_wall_time_ms,
            "fallback_used": self.fallback_used,
        }


def _mean_std(values: list[float]) -> MetricStat:
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / n   # population std, like the ± entries
    return MetricStat(mean=mean, std=math.sqrt(var))


def aggregate(results: list[dict] | str | Path,
              manifest: CorpusManifest | str | Path | None = None) -> list[CaseReport]:
    """Group per-image records by case and compute mean ±std statistics.

    Failure records are skipped; a case whose records all failed is
    omitted. Cases are ordered as first encountered in the results, which
    follows manifest order for pipeline output.
    """
    if not isinstance(results, list):
        results = read_results(results)
    if manifest is not None and not isinstance(manifest, CorpusManifest):
        manifest = load_manifest(manifest)

    order: list[str] = []
    groups: dict[str, list[dict]] = {}
    failed_cases: set[str] = set()
    for rec in results:
        case = rec.get("case_id") or "all"
        if rec.get("failed"):
            failed_cases.add(case)
            continue
        if case not in groups:
            order.append(case)
            groups[case] = []
        groups[case].append(rec)
    for case in sorted(failed_cases - set(groups)):
        log.warning("case %s has no successful records; omitted from the report", case)

    reports = []
    for case in order:
        recs = groups[case]
        with_metrics = [r for r in recs if r.get("metrics")]
        metrics = {}
        avg_exposure = 0.0
        if with_metrics:
            for key in METRIC_KEYS:
                metrics[key] = _mean_std([r["metrics"][key] for r in with_metrics])
            avg_exposure = sum(r["metrics"]["exposure_score"] for r in with_metrics) / len(with_metrics)
        reports.append(CaseReport(
            case_id=case,
            avg_exposure=avg_exposure,
            sample_count=len(recs),
            metrics=metrics,
            avg_wall_time_ms=sum(r["wall_time_ms"] for r in recs) / len(recs),
            fallback_used=sum(1 for r in recs if r["source"] == "fallback"),
        ))
    return reports


_COLUMNS = ("Case", "Average Exposure", "Number of Samples", "IoU", "Precision",
            "Recall", "F1 Score", "Execution Time", "Fallback Used")


def render_report_txt(reports: list[CaseReport]) -> str:
    """Aligned text table, one row per case, metric cells as 'mean ±std'."""
    rows = [list(_COLUMNS)]
    for r in reports:
        cells = [r.case_id, f"{r.avg_exposure:.1f}", str(r.sample_count)]
        for key in METRIC_KEYS:
            cells.append(r.metrics[key].format() if key in r.metrics else "-")
        cells.append(f"{r.avg_wall_time_ms:.2f}")
        cells.append(str(r.fallback_used))
        rows.append(cells)
    widths = [max(len(row[i]) for row in rows) for i in range(len(_COLUMNS))]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def write_report(out_dir: str | Path, reports: list[CaseReport]) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "report.json"
    txt_path = out / "report.txt"
    json_path.write_text(
        json.dumps({"cases": [r.to_dict() for r in reports]}, indent=2) + "\n",
        encoding="utf-8")
    txt_path.write_text(render_report_txt(reports), encoding="utf-8")
    return json_path, txt_path


@dataclass(frozen=True)
class ComparisonReport:
    cases: list[tuple[CaseReport, CaseReport]]          # (baseline, hybrid) pairs
    improvement: dict[str, float]                       # relative, over pooled means

    def to_dict(self) -> dict:
        return {
            "cases": [{"case_id": b.case_id, "baseline": b.to_dict(), "hybrid": h.to_dict()}
                      for b, h in self.cases],
            "improvement": self.improvement,
        }


def compare(baseline: list[CaseReport], hybrid: list[CaseReport]) -> ComparisonReport:
    """Pair cases by id and compute relative improvement per metric.

    Improvement is (hybrid - baseline) / baseline over pooled means, the
    pooled mean being the unweighted mean of the per-case means. Only
    cases present in both runs participate; disjoint case sets are an
    error.
    """
    base_by_id = {r.case_id: r for r in baseline}
    pairs = [(base_by_id[h.case_id], h) for h in hybrid if h.case_id in base_by_id]
    if not pairs:
        raise ValueError("no common case ids between baseline and hybrid runs")
    improvement = {}
    for key in METRIC_KEYS:
        base_means = [b.metrics[key].mean for b, _ in pairs if key in b.metrics]
        hyb_means = [h.metrics[key].mean for _, h in pairs if key in h.metrics]
        if not base_means or not hyb_means:
            continue
        pooled_base = sum(base_means) / len(base_means)
        pooled_hyb = sum(hyb_means) / len(hyb_means)
        improvement[key] = (pooled_hyb - pooled_base) / pooled_base if pooled_base else 0.0
    return ComparisonReport(cases=pairs, improvement=improvement)


def render_comparison_txt(cmp: ComparisonReport) -> str:
    header = ["Case", "Average Exposure", "Number of Samples"]
    header += [f"{name} (baseline / hybrid)" for name in ("IoU", "Precision", "Recall", "F1 Score")]
    header += ["Execution Time", "Fallback Used"]
    rows = [header]
    for b, h in cmp.cases:
        cells = [b.case_id, f"{h.avg_exposure:.1f}", str(h.sample_count)]
        for key in METRIC_KEYS:
            if key in b.metrics and key in h.metrics:
                cells.append(f"{b.metrics[key].format()} / {h.metrics[key].format()}")
            else:
                cells.append("-")
        cells.append(f"{b.avg_wall_time_ms:.2f} / {h.avg_wall_time_ms:.2f}")
        cells.append(f"{b.fallback_used} / {h.fallback_used}")
        rows.append(cells)
    overall = ["Overall Improvement", "-", "-"]
    for key in METRIC_KEYS:
        if key in cmp.improvement:
            overall.append(f"{cmp.improvement[key] * 100.0:+.2f}%")
        else:
            overall.append("-")
    overall += ["-", "-"]
    rows.append(overall)
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def write_comparison(out_dir: str | Path, cmp: ComparisonReport) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "comparison.txt"
    path.write_text(render_comparison_txt(cmp), encoding="utf-8")
    (out / "comparison.json").write_text(json.dumps(cmp.to_dict(), indent=2) + "\n",
                                         encoding="utf-8")
    return path
