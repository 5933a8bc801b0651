"""Deterministic quality assessment of candidate masks and the
highest-confidence-that-passes selection rule.

Three checks run in order (confidence, topology, geometry), and all three
are always evaluated so a report carries the complete failure picture
even when an early check already failed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .raster import BinaryMask, check_mask, label_components


@dataclass(frozen=True)
class ScoredMask:
    mask: BinaryMask
    predicted_iou: float
    candidate_id: str

    def __post_init__(self):
        check_mask(self.mask)
        if not (math.isfinite(self.predicted_iou) and 0.0 <= self.predicted_iou <= 1.0):
            raise ValueError(f"predicted_iou must be in [0, 1], got {self.predicted_iou}")


@dataclass(frozen=True)
class GateConfig:
    tau_conf: float = 0.90
    min_area: int = 16
    max_area: int | None = None        # None: no upper bound
    min_aspect: float = 0.05
    max_aspect: float = 20.0
    connectivity: int = 8

    def __post_init__(self):
        if not (0.0 <= self.tau_conf <= 1.0):
            raise ValueError("tau_conf must be in [0, 1]")
        if self.max_area is not None and self.min_area > self.max_area:
            raise ValueError("min_area must not exceed max_area")
        if self.min_aspect > self.max_aspect:
            raise ValueError("min_aspect must not exceed max_aspect")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")

    def to_dict(self) -> dict:
        return {"tau_conf": self.tau_conf, "min_area": self.min_area,
                "max_area": self.max_area, "min_aspect": self.min_aspect,
                "max_aspect": self.max_aspect, "connectivity": self.connectivity}

    @classmethod
    def from_dict(cls, d: dict) -> "GateConfig":
        return cls(**d)


def gate_config_from_reference(ref_mask: BinaryMask, base: GateConfig | None = None) -> GateConfig:
    """Derive plausible area/aspect ranges from a reference layout mask.

    Area may range over [0.5, 2] times the reference area and aspect over
    [0.5, 2] times the reference bounding-box aspect.
    """
    base = base or GateConfig()
    ref_mask = check_mask(ref_mask)
    area = int(ref_mask.sum())
    if area == 0:
        return base
    ys, xs = ref_mask.nonzero()
    aspect = (int(xs.max()) - int(xs.min()) + 1) / (int(ys.max()) - int(ys.min()) + 1)
    return replace(base,
                   min_area=max(1, area // 2), max_area=2 * area,
                   min_aspect=0.5 * aspect, max_aspect=2.0 * aspect)


@dataclass(frozen=True)
class GateReport:
    candidate_id: str
    confidence_pass: bool
    topology_pass: bool
    geometry_pass: bool
    component_count: int
    area: int
    aspect: float
    failure_reason: str = ""

    @property
    def overall_pass(self) -> bool:
        return self.confidence_pass and self.topology_pass and self.geometry_pass

    def to_dict(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "confidence_pass": self.confidence_pass,
            "topology_pass": self.topology_pass,
            "geometry_pass": self.geometry_pass,
            "component_count": self.component_count,
            "area": self.area,
            "aspect": self.aspect,
            "overall_pass": self.overall_pass,
            "failure_reason": self.failure_reason,
        }


def assess(c: ScoredMask, cfg: GateConfig | None = None) -> GateReport:
    """Run the three-stage quality check on one candidate.

    Confidence requires predicted_iou strictly above tau_conf; topology
    requires exactly one connected component; geometry requires pixel
    area and bounding-box aspect inside the configured ranges (computed
    over the whole foreground; an empty mask fails topology and geometry).
    """
    cfg = cfg or GateConfig()
    confidence_pass = c.predicted_iou > cfg.tau_conf

    lm = label_components(c.mask, connectivity=cfg.connectivity)
    count = lm.component_count
    topology_pass = count == 1

    area = int(c.mask.sum())
    if area > 0:
        ys, xs = c.mask.nonzero()
        aspect = (int(xs.max()) - int(xs.min()) + 1) / (int(ys.max()) - int(ys.min()) + 1)
    else:
        aspect = 0.0
    max_area = cfg.max_area if cfg.max_area is not None else c.mask.size
    geometry_pass = (area > 0 and cfg.min_area <= area <= max_area
                     and cfg.min_aspect <= aspect <= cfg.max_aspect)

    reasons = []
    if not confidence_pass:
        reasons.append(f"confidence {c.predicted_iou:.4f} <= tau {cfg.tau_conf:.4f}")
    if not topology_pass:
        reasons.append(f"components {count} != 1")
    if not geometry_pass:
        reasons.append(f"area {area} or aspect {aspect:.3f} out of range")
    return GateReport(candidate_id=c.candidate_id, confidence_pass=confidence_pass,
                      topology_pass=topology_pass, geometry_pass=geometry_pass,
                      component_count=count, area=area, aspect=aspect,
                      failure_reason="; ".join(reasons))


def select_candidate(cands: list[ScoredMask], cfg: GateConfig | None = None
                     ) -> tuple[tuple[ScoredMask, GateReport] | None, list[GateReport]]:
    """Pick the highest-confidence candidate that passes every check.

    Ties break toward the earliest candidate in the input list. Returns
    (selection or None, all reports); None signals fallback activation.
    """
    cfg = cfg or GateConfig()
    reports = [assess(c, cfg) for c in cands]
    best = None
    for cand, report in zip(cands, reports):
        if report.overall_pass and (best is None or cand.predicted_iou > best[0].predicted_iou):
            best = (cand, report)
    return best, reports
