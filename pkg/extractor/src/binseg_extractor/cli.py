"""binseg-extract: feature-map export, corpus sampling, and GT conversion."""

import argparse
import logging
import os
import sys

from .corpus import sample_corpus
from .extract import extract
from .gt import convert_gt
from .network import TAPS, ExtractorConfig, MissingWeightsError


def _configure_logging() -> None:
    levels = {"error": logging.ERROR, "warn": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
    level = levels.get(os.environ.get("BINSEG_LOG", "warn").lower(),
                       logging.WARNING)
    logging.basicConfig(level=level,
                        format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="binseg-extract",
        description="Export CNN feature maps and convert ground truth for "
                    "the binseg toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="images -> FMAP feature maps")
    p.add_argument("images", nargs="+", help="input images (any PIL format)")
    p.add_argument("--tap", choices=TAPS, default="fc7",
                   help="layer to export")
    p.add_argument("--weights", default="pretrained",
                   help="'pretrained', 'random', or a state-dict path")
    p.add_argument("--seed", type=int, default=0,
                   help="init seed when --weights random")
    p.add_argument("--min-side", type=int, default=227,
                   help="upscale so the shorter image side reaches this")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("sample-corpus", help="FMAP files -> FVEC corpus")
    p.add_argument("fmaps", nargs="+", help="input FMAP files")
    p.add_argument("-n", "--num-vectors", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("convert-gt", help="dataset ground truth -> PGMs")
    p.add_argument("--dataset", choices=("msrc", "bsds"), required=True)
    p.add_argument("--in-dir", required=True)
    p.add_argument("--out-dir", required=True)

    return parser


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.command == "extract":
            config = ExtractorConfig(tap=args.tap, weights=args.weights,
                                     seed=args.seed, min_side=args.min_side)
            written = extract(args.images, config, args.out_dir)
        elif args.command == "sample-corpus":
            sample_corpus(args.fmaps, args.num_vectors, args.seed, args.out)
            written = [args.out]
        else:
            written = convert_gt(args.dataset, args.in_dir, args.out_dir)
    except (MissingWeightsError, ValueError, OSError) as exc:
        print(f"binseg-extract: {exc}", file=sys.stderr)
        return 2
    print("\n".join(written))
    return 0


if __name__ == "__main__":
    sys.exit(main())
