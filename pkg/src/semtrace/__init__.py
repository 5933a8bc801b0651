"""Hybrid SEM contour extraction.

Scored mask candidates pass a deterministic quality gate (confidence,
topology, geometry); when nothing passes, a Sauvola adaptive-threshold
fallback produces the mask instead. Either way the accepted mask is
refined morphologically and traced into closed pixel contours. A
synthetic corpus generator and an evaluation harness make every stage
verifiable without proprietary imagery.
"""

from .gate import GateConfig, GateReport, ScoredMask, assess, select_candidate
from .metrics import (ConfusionCounts, EpeResult, ScoreWeights, composite_score,
                      confusion, dice_loss, epe, exposure_score, f1, iou,
                      mask_count, mask_iou, precision, recall)
from .pipeline import (BatchResult, PipelineConfig, PipelineResult, ProviderConfig,
                       process_image, read_results, run_batch)
from .providers import (DirectoryProvider, NullProvider, OracleConfig,
                        OracleProvider, write_candidates)
from .raster import (BinaryMask, GrayImage, IntegralImage, LabelMap, RegionStats,
                     build_integral, label_components, read_mask_pgm, read_pgm,
                     window_stats, write_mask_pgm, write_pgm)
from .refine import (Contour, StructuringElement, boundary_pixels, dilate, erode,
                     extract_contours, fill_holes, morph_close, sobel_magnitude)
from .report import CaseReport, ComparisonReport, aggregate, compare
from .sauvola import SauvolaParams, fallback_extract, sauvola_mask
from .synth import (LayoutSpec, Polygon, Rect, Rng, SynthParams, default_cases,
                    default_layouts, derive_seed, load_manifest, make_corpus,
                    rasterize, render)

__version__ = "0.1.0"
