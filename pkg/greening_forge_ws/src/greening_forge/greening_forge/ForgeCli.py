import argparse
import json
import logging
from typing import List, Optional

from greening_forge.Dataset import (
    compute_loss,
    derive_mask,
    evaluate_dirs,
    generate_dataset,
    run_baseline,
    run_preview,
    write_report,
)
from greening_forge.Errors import DomainError, FormatError, UsageError
from greening_forge.LossKernel import DEFAULT_FREQUENCY_WEIGHT, DEFAULT_THRESHOLD, LOSS_VARIANTS
from greening_forge.SynthConfig import SynthConfig

logger = logging.getLogger("greening_forge")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_IO = 4

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"


def _load_config(path: Optional[str]) -> SynthConfig:
    return SynthConfig.from_file(path) if path else SynthConfig()


def _cmd_generate(args: argparse.Namespace) -> int:
    manifest = generate_dataset(
        args.clean_dir, args.out, _load_config(args.config), args.seed, args.jobs, args.split
    )
    print(f"{len(manifest.entries)} pairs written to {args.out}")
    return EXIT_OK


def _cmd_derive_mask(args: argparse.Namespace) -> int:
    derive_mask(args.input, args.gt, args.out, args.t)
    return EXIT_OK


def _cmd_evaluate(args: argparse.Namespace) -> int:
    report = evaluate_dirs(args.restored, args.gt, args.masks, args.inputs, args.scales, args.jobs)
    aggregate_file = write_report(report, args.out)
    print(json.dumps(report.aggregate(), sort_keys=True))
    logger.info("Aggregate written to %s", aggregate_file)
    if not report.rows:
        logger.error("Every pair was skipped")
        return EXIT_DATA
    return EXIT_OK


def _cmd_loss(args: argparse.Namespace) -> int:
    report = compute_loss(args.pred, args.gt, args.input, args.w, args.t, args.freq_weight)
    print(json.dumps(report.to_dict(), sort_keys=True))
    return EXIT_OK


def _cmd_baseline(args: argparse.Namespace) -> int:
    run_baseline(args.defected, args.mask, args.out, args.annulus, args.reference_mask)
    return EXIT_OK


def _cmd_preview(args: argparse.Namespace) -> int:
    run_preview(args.clean, args.out, args.seed, _load_config(args.config))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with one subcommand per operation."""
    parser = argparse.ArgumentParser(
        prog="greening_forge",
        description="Synthetic greening defects for autochrome restoration: "
                    "data, losses, metrics and baseline.",
    )
    parser.add_argument("--verbose", action="store_true",
                        help="Log per-image and per-defect details")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="Build a paired dataset from clean images")
    p.add_argument("clean_dir")
    p.add_argument("--out", required=True, help="Output dataset directory")
    p.add_argument("--config", help="YAML synthesis config")
    p.add_argument("--seed", type=int, default=0, help="Dataset seed")
    p.add_argument("--jobs", type=int, default=1, help="Worker processes")
    p.add_argument("--split", type=float, help="Train fraction for a seeded train/test split")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("derive-mask", help="Recover a defect mask from a before/after pair")
    p.add_argument("input")
    p.add_argument("gt")
    p.add_argument("--out", required=True)
    p.add_argument("--t", type=float, default=DEFAULT_THRESHOLD,
                   help="Channel-max difference threshold")
    p.set_defaults(func=_cmd_derive_mask)

    p = sub.add_parser("evaluate", help="Score restored images against ground truth")
    p.add_argument("restored")
    p.add_argument("gt")
    p.add_argument("--masks", help="Defect masks, enables cropout SSIM")
    p.add_argument("--inputs", help="Defected inputs, enables loss and outside-change columns")
    p.add_argument("--scales", type=int, default=5, help="MS-SSIM scales")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="JSON-lines report path")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("loss", help="Weighted restoration loss of one prediction")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("input")
    p.add_argument("--w", type=float, default=LOSS_VARIANTS["loss10"],
                   choices=sorted(set(LOSS_VARIANTS.values())), help="Weight of non-defect pixels")
    p.add_argument("--t", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--freq-weight", type=float, default=DEFAULT_FREQUENCY_WEIGHT)
    p.set_defaults(func=_cmd_loss)

    p = sub.add_parser("baseline", help="Histogram-matching restoration")
    p.add_argument("defected")
    p.add_argument("mask")
    p.add_argument("--out", required=True)
    p.add_argument("--annulus", type=int, default=16, help="Reference annulus width in pixels")
    p.add_argument("--reference-mask", help="Hand-picked clean reference region")
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("preview", help="Contact sheet of one synthetic pair")
    p.add_argument("clean")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="YAML synthesis config")
    p.set_defaults(func=_cmd_preview)
    return parser


def main(args: Optional[List[str]] = None) -> int:
    """Run the greening_forge command and return its exit code."""
    parser = build_parser()
    try:
        parsed = parser.parse_args(args)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK

    logging.basicConfig(level=logging.DEBUG if parsed.verbose else logging.INFO, format=LOG_FORMAT)
    try:
        return parsed.func(parsed)
    except UsageError as exc:
        logger.error("%s", exc)
        return EXIT_USAGE
    except (DomainError, FormatError) as exc:
        logger.error("%s", exc)
        return EXIT_DATA
    except OSError as exc:
        logger.error("%s", exc)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
