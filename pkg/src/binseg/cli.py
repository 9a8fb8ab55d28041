"""Command-line entry point for every pipeline stage and the benchmark.

Exit codes: 0 success, 1 usage error, 2 data/format error. The environment
variable BINSEG_LOG ({error, warn, info, debug}) controls log verbosity.
"""

import argparse
import logging
import os
import sys

from . import pipeline
from .egs import EgsParams, egs_segment
from .evaluation import (SweepConfig, dataset_iou, match_segments,
                         read_manifest, sweep_superpixels, write_sweep_csv,
                         write_sweep_details)
from .itq import (encode_feature_map, load_corpus, load_model, save_model,
                  train_hash_model, write_binary_code_map)
from .pipeline import write_sidecar
from .segmenter import MERGE_MODES
from .slic import SlicParams, slic
from .tensor_io import (FormatError, read_feature_map, read_image,
                        read_label_map, write_label_map)

log = logging.getLogger("binseg.cli")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the CLI contract reserves 2 for
    data errors, so remap usage problems to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _configure_logging() -> None:
    level = _LOG_LEVELS.get(os.environ.get("BINSEG_LOG", "warn").lower(),
                            logging.WARNING)
    logging.basicConfig(level=level,
                        format="%(levelname)s %(name)s: %(message)s")


def _slic_params(args) -> SlicParams:
    return SlicParams(num_superpixels=args.superpixels,
                      compactness=args.compactness,
                      iterations=args.iters)


def _cmd_train_itq(args) -> int:
    corpus = load_corpus(args.corpus)
    model, report = train_hash_model(corpus, code_len=args.code_len,
                                     iterations=args.iters, seed=args.seed)
    save_model(model, args.out)
    log.info("trained %d-bit model on %d vectors (dim %d)",
             model.code_len, len(corpus), model.input_dim)
    print(f"final_loss={report.loss_per_iter[-1]:.6f} "
          f"iterations={report.iterations} out={args.out}")
    return 0


def _cmd_encode(args) -> int:
    model = load_model(args.model)
    fmap = read_feature_map(args.fmap)
    binmap = encode_feature_map(model, fmap)
    write_binary_code_map(binmap, args.out)
    print(f"grid={binmap.height}x{binmap.width} code_len={binmap.code_len} "
          f"out={args.out}")
    return 0


def _cmd_slic(args) -> int:
    image = read_image(args.image)
    labels = slic(image, _slic_params(args), args.seed)
    write_label_map(labels, args.out)
    print(f"superpixels={labels.num_labels} out={args.out}")
    return 0


def _cmd_egs(args) -> int:
    image = read_image(args.image)
    params = EgsParams(sigma=args.sigma, k=args.k, min_size=args.min_size)
    labels = egs_segment(image, params)
    write_label_map(labels, args.out)
    print(f"segments={labels.num_labels} out={args.out}")
    return 0


def _cmd_segment(args) -> int:
    image = read_image(args.image)
    fmap = read_feature_map(args.fmap)
    model = load_model(args.model)
    result, superpixels = pipeline.segment_with_codes(
        image, fmap, model, _slic_params(args), args.seed, args.merge_mode)
    write_label_map(result.labels, args.out)
    write_sidecar(result, model.code_len, args.out + ".txt")
    print(f"superpixels={superpixels.num_labels} "
          f"segments={result.labels.num_labels} out={args.out}")
    return 0


def _cmd_kmeans_baseline(args) -> int:
    image = read_image(args.image)
    fmap = read_feature_map(args.fmap)
    result, superpixels = pipeline.kmeans_baseline(
        image, fmap, args.kmeans_k, _slic_params(args), args.seed,
        args.merge_mode)
    write_label_map(result.labels, args.out)
    write_sidecar(result, 64, args.out + ".txt")
    print(f"superpixels={superpixels.num_labels} "
          f"segments={result.labels.num_labels} out={args.out}")
    return 0


def _cmd_eval(args) -> int:
    pred = read_label_map(args.pred)
    reports = [match_segments(pred, read_label_map(path)) for path in args.gt]
    print(f"mean_iou={dataset_iou(reports):.4f}")
    return 0


def _cmd_sweep(args) -> int:
    entries = read_manifest(args.manifest)
    config = SweepConfig(
        counts=tuple(args.counts), methods=tuple(args.methods),
        seed=args.seed, model_path=args.model,
        compactness=args.compactness, slic_iterations=args.iters,
        egs=EgsParams(sigma=args.sigma, k=args.k, min_size=args.min_size),
        kmeans_k=args.kmeans_k, merge_mode=args.merge_mode)
    result = sweep_superpixels(entries, config, jobs=args.jobs)
    write_sweep_csv(result, args.out)
    details_path = args.details or args.out + ".jsonl"
    write_sweep_details(result, details_path)
    best = max(result.rows, key=lambda r: r.mean_iou_percent)
    print(f"rows={len(result.rows)} best={best.method}@{best.superpixel_count}"
          f"={best.mean_iou_percent:.2f}% out={args.out}")
    return 0


def _counts_list(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad counts list {text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("counts list is empty")
    return values


def _methods_list(text: str) -> list[str]:
    return [part for part in text.split(",") if part]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="binseg",
                     description="Binary-code segmentation toolkit")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("train-itq", help="learn hashing weights from a corpus")
    p.add_argument("corpus", nargs="+", help="FVEC and/or FMAP files")
    p.add_argument("--code-len", type=int, default=8, help="bits per code")
    p.add_argument("--iters", type=int, default=50, help="ITQ iterations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model file to write")
    p.set_defaults(func=_cmd_train_itq)

    p = sub.add_parser("encode", help="encode a feature map to binary codes")
    p.add_argument("fmap", help="FMAP file")
    p.add_argument("--model", required=True, help="trained model file")
    p.add_argument("--out", required=True, help="BMAP code map to write")
    p.set_defaults(func=_cmd_encode)

    def slic_flags(p):
        p.add_argument("--superpixels", type=int, default=200,
                       help="target superpixel count")
        p.add_argument("--compactness", type=float, default=10.0)
        p.add_argument("--iters", type=int, default=10, help="SLIC iterations")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("slic", help="SLIC superpixels")
    p.add_argument("image", help="PPM image")
    slic_flags(p)
    p.add_argument("--out", required=True, help="label-map PGM to write")
    p.set_defaults(func=_cmd_slic)

    def egs_flags(p):
        p.add_argument("--sigma", type=float, default=1.0,
                       help="pre-smoothing Gaussian std-dev")
        p.add_argument("--k", type=float, default=100.0, help="scale parameter")
        p.add_argument("--min-size", type=int, default=20,
                       help="post-merge component floor")

    p = sub.add_parser("egs", help="efficient graph-based segmentation")
    p.add_argument("image", help="PPM image")
    egs_flags(p)
    p.add_argument("--out", required=True, help="label-map PGM to write")
    p.set_defaults(func=_cmd_egs)

    p = sub.add_parser("segment",
                       help="full pipeline: superpixels + codes + merging")
    p.add_argument("image", help="PPM image")
    p.add_argument("fmap", help="FMAP file extracted from the image")
    p.add_argument("--model", required=True, help="trained model file")
    slic_flags(p)
    p.add_argument("--merge-mode", choices=MERGE_MODES, default="adjacency")
    p.add_argument("--out", required=True, help="label-map PGM to write")
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("kmeans-baseline",
                       help="merge superpixels by k-means clustering")
    p.add_argument("image", help="PPM image")
    p.add_argument("fmap", help="FMAP file extracted from the image")
    slic_flags(p)
    p.add_argument("--kmeans-k", type=int, default=256, help="cluster count")
    p.add_argument("--merge-mode", choices=MERGE_MODES, default="adjacency")
    p.add_argument("--out", required=True, help="label-map PGM to write")
    p.set_defaults(func=_cmd_kmeans_baseline)

    p = sub.add_parser("eval", help="IoU of a prediction against ground truth")
    p.add_argument("pred", help="predicted label-map PGM")
    p.add_argument("gt", nargs="+", help="ground-truth label-map PGM(s)")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="benchmark over a dataset manifest")
    p.add_argument("manifest",
                   help="lines of image<TAB>fmap<TAB>gt[<TAB>gt...]")
    p.add_argument("--model", help="model file (needed for 'proposed')")
    p.add_argument("--counts", type=_counts_list,
                   default=[100, 200, 300, 400, 500],
                   help="comma-separated superpixel counts")
    p.add_argument("--methods", type=_methods_list,
                   default=["proposed", "slic", "egs", "kmeans"],
                   help="comma-separated subset of proposed,slic,egs,kmeans")
    p.add_argument("--compactness", type=float, default=10.0)
    p.add_argument("--iters", type=int, default=10, help="SLIC iterations")
    egs_flags(p)
    p.add_argument("--kmeans-k", type=int, default=256)
    p.add_argument("--merge-mode", choices=MERGE_MODES, default="adjacency")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV to write")
    p.add_argument("--details", help="JSONL detail log (default: OUT.jsonl)")
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (FormatError, ValueError, ArithmeticError, OSError) as exc:
        print(f"binseg: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
