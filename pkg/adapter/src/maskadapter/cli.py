"""Adapter command line: fine-tune the model or export candidates."""

from __future__ import annotations

import argparse
import sys

from .export import AdapterConfig, export_candidates
from .losses import LossWeights
from .train import FinetuneConfig, finetune, pretrain


def cmd_pretrain(args) -> int:
    path = pretrain(args.corpus, args.checkpoint_out, iterations=args.iterations,
                    learning_rate=args.lr, seed=args.seed, device=args.device)
    print(path)
    return 0


def cmd_finetune(args) -> int:
    cfg = FinetuneConfig(
        learning_rate=args.lr,
        max_iterations=args.max_iterations,
        eval_every=args.eval_every,
        patience=args.patience,
        weights=LossWeights(iou_weight=args.iou_weight,
                            count_weight=args.count_weight,
                            epe_weight=args.epe_weight),
        device=args.device,
        seed=args.seed,
    )
    result = finetune(args.corpus, args.checkpoint_in, args.checkpoint_out,
                      args.log, cfg)
    print(f"iterations={result.iterations} early_stop={result.stopped_early} "
          f"first_loss={result.first_loss:.4f} final_loss={result.final_loss:.4f} "
          f"best_val={result.best_val_loss:.4f}")
    print(result.checkpoint_path)
    return 0


def cmd_export(args) -> int:
    cfg = AdapterConfig(checkpoint=args.checkpoint, device=args.device,
                        candidates_per_image=args.candidates,
                        export_root=args.out)
    result = export_candidates(args.images, cfg)
    print(f"exported={len(result.exported)} failed={len(result.failed)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maskadapter",
        description="Fine-tune a promptable segmentation model (frozen decoder) "
                    "and export scored mask candidates.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="train all parameters from scratch, "
                                        "producing a base checkpoint")
    p.add_argument("--corpus", required=True, help="corpus directory or manifest")
    p.add_argument("--checkpoint-out", required=True)
    p.add_argument("--iterations", type=int, default=300)
    p.add_argument("--lr", type=float, default=3e-3)
    p.add_argument("--device", default="cpu")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("finetune", help="encoder-only fine-tuning")
    p.add_argument("--corpus", required=True, help="corpus directory or manifest")
    p.add_argument("--checkpoint-in", default=None,
                   help="starting checkpoint (omit to initialize fresh)")
    p.add_argument("--checkpoint-out", required=True)
    p.add_argument("--log", required=True, help="training log JSONL path")
    p.add_argument("--lr", type=float, default=1e-5)
    p.add_argument("--max-iterations", type=int, default=1000)
    p.add_argument("--eval-every", type=int, default=10)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--iou-weight", type=float, default=1.0)
    p.add_argument("--count-weight", type=float, default=0.1)
    p.add_argument("--epe-weight", type=float, default=0.01)
    p.add_argument("--device", default="cpu")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("export", help="export candidates for a directory of PGMs")
    p.add_argument("--images", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--candidates", type=int, default=3)
    p.add_argument("--device", default="cpu")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())
