"""Command-line entry point.

Subcommands: synth | run | report | compare | gate-debug. Configuration
layers as defaults < config file < flags, and every random decision flows
from the --seed flag (a fixed constant when omitted, never wall clock).

Exit codes: 0 success, 2 usage error, 3 I/O or environment error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .gate import assess
from .pipeline import PipelineConfig, ProviderConfig, run_batch
from .providers import DirectoryProvider
from .raster import read_pgm
from .report import aggregate, compare, write_comparison, write_report
from .synth import default_cases, default_layouts, load_manifest, make_corpus

DEFAULT_SEED = 20240601


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _load_config(path: str | None) -> PipelineConfig:
    if not path:
        return PipelineConfig()
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return PipelineConfig.from_dict(doc)


def _provider_config(args, base: ProviderConfig) -> ProviderConfig:
    spec = args.provider
    if spec is None:
        cfg = base
    elif spec == "null":
        cfg = ProviderConfig(kind="null")
    elif spec == "oracle":
        cfg = ProviderConfig(kind="oracle", oracle=base.oracle)
    elif spec.startswith("dir:"):
        cfg = ProviderConfig(kind="directory", candidates_root=spec[4:])
    else:
        raise ValueError(f"unknown provider {spec!r} (use null, oracle, or dir:PATH)")
    if cfg.kind == "oracle":
        oracle = cfg.oracle
        if args.oracle_fail_prob is not None:
            oracle = replace(oracle, fail_probability=args.oracle_fail_prob)
        if args.oracle_perturbations is not None:
            oracle = replace(oracle, perturbations=tuple(args.oracle_perturbations.split(",")))
        if args.oracle_score_mode is not None:
            oracle = replace(oracle, score_mode=args.oracle_score_mode)
        oracle = replace(oracle, seed=args.seed)
        cfg = replace(cfg, oracle=oracle)
    return cfg


def cmd_synth(args) -> int:
    layouts = default_layouts(args.width, args.height)
    cases = default_cases(args.cases)
    manifest = make_corpus(layouts, cases, args.samples, args.seed, args.out)
    print(manifest)
    return 0


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    cfg = replace(cfg, provider=_provider_config(args, cfg.provider))
    manifest = load_manifest(args.corpus)
    batch = run_batch(manifest, args.out, cfg, gt_available=not args.no_gt,
                      workers=args.workers)
    summary = (f"images={batch.processed + batch.failed} failed={batch.failed} "
               f"fallback={batch.fallback_used}")
    if not args.no_gt and batch.processed:
        reports = aggregate(batch.results_path, manifest)
        with_iou = [r for r in reports if "iou" in r.metrics]
        if with_iou:
            mean_iou = sum(r.metrics["iou"].mean for r in with_iou) / len(with_iou)
            summary += f" mean_iou={mean_iou:.4f}"
    print(summary)
    print(batch.results_path)
    return 0


def cmd_report(args) -> int:
    reports = aggregate(args.results, args.corpus)
    json_path, txt_path = write_report(args.out or Path(args.results).parent, reports)
    print(txt_path)
    return 0


def cmd_compare(args) -> int:
    def reports_for(run_dir: str) -> list:
        return aggregate(Path(run_dir) / "results.jsonl")

    cmp = compare(reports_for(args.baseline), reports_for(args.hybrid))
    path = write_comparison(args.out or args.hybrid, cmp)
    print(path)
    return 0


def cmd_gate_debug(args) -> int:
    img = read_pgm(args.image)
    image_id = Path(args.image).name
    for suffix in (".pgm", ".png"):
        if image_id.endswith(suffix):
            image_id = image_id[:-len(suffix)]
    cfg = _load_config(args.config)
    provider = DirectoryProvider(candidates_root=Path(args.candidates))
    candidates = provider.candidates_for(image_id, img)
    if not candidates:
        print(f"no candidates for {image_id} (fallback would be used)")
        return 0
    for cand in candidates:
        report = assess(cand, cfg.gate)
        verdict = "PASS" if report.overall_pass else "FAIL"
        detail = report.failure_reason or (
            f"components {report.component_count}, area {report.area}, "
            f"aspect {report.aspect:.3f}")
        print(f"{report.candidate_id}: {verdict} score={cand.predicted_iou:.4f} "
              f"conf={report.confidence_pass} topo={report.topology_pass} "
              f"geom={report.geometry_pass} ({detail})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semtrace",
        description="Hybrid SEM contour extraction: gated candidates with an "
                    "adaptive-threshold fallback.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True, help="output corpus directory")
    p.add_argument("--cases", type=_positive_int, default=10)
    p.add_argument("--samples", type=_positive_int, default=50,
                   help="samples per case")
    p.add_argument("--width", type=_positive_int, default=96)
    p.add_argument("--height", type=_positive_int, default=96)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="run the pipeline over a corpus")
    p.add_argument("--corpus", required=True, help="corpus directory or manifest path")
    p.add_argument("--out", required=True, help="run output directory")
    p.add_argument("--provider", default=None,
                   help="null | oracle | dir:PATH (default from config, else null)")
    p.add_argument("--config", default=None, help="pipeline config JSON")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--no-gt", action="store_true",
                   help="production mode: skip ground-truth metrics")
    p.add_argument("--oracle-fail-prob", type=float, default=None)
    p.add_argument("--oracle-perturbations", default=None,
                   help="comma-separated list, e.g. erode:1,dilate:1")
    p.add_argument("--oracle-score-mode", default=None, help="true_iou | fixed:V")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="aggregate a results file into case tables")
    p.add_argument("--results", required=True, help="results.jsonl path")
    p.add_argument("--corpus", default=None, help="corpus directory (optional)")
    p.add_argument("--out", default=None, help="report output directory")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("compare", help="compare two runs case by case")
    p.add_argument("--baseline", required=True, help="baseline run directory")
    p.add_argument("--hybrid", required=True, help="hybrid run directory")
    p.add_argument("--out", default=None, help="comparison output directory")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gate-debug", help="explain gate decisions for one image")
    p.add_argument("--image", required=True, help="image PGM path")
    p.add_argument("--candidates", required=True, help="candidate directory")
    p.add_argument("--config", default=None, help="pipeline config JSON")
    p.set_defaults(func=cmd_gate_debug)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())
