"""Segmentation-IoU metric, max-IoU segment matching, dataset aggregation,
and the superpixel-count sweep over a dataset manifest.

Aggregation is segment-weighted: the dataset score is the mean over all
ground-truth segments of all images (and all annotations), not a mean of
per-image means. Ground-truth pixels labeled VOID_LABEL are excluded from
both intersection and union counts.
"""

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import pipeline
from .egs import EgsParams, egs_segment
from .itq import HashModel, load_model
from .segmenter import (build_rag, kmeans_merge, superpixel_mean_features,
                        upsample_features)
from .slic import SlicParams, slic
from .tensor_io import (VOID_LABEL, LabelMap, read_feature_map, read_image,
                        read_label_map)

log = logging.getLogger("binseg.evaluation")

SWEEP_METHODS = ("proposed", "slic", "egs", "kmeans")


@dataclass
class IoUReport:
    """Best-match IoU of every ground-truth segment in one image."""

    per_gt_segment: list[tuple[int, int, float]]  # (gt id, pred id, iou)
    mean_iou: float
    num_gt_segments: int


@dataclass
class SweepRow:
    superpixel_count: int
    method: str
    mean_iou_percent: float


@dataclass
class SweepResult:
    rows: list[SweepRow]
    details: list[dict] = field(default_factory=list)


def iou(pred_mask: np.ndarray, gt_mask: np.ndarray) -> float:
    """|pred & gt| / |pred | gt| from exact integer counts."""
    pred_mask = np.asarray(pred_mask, dtype=bool)
    gt_mask = np.asarray(gt_mask, dtype=bool)
    if pred_mask.shape != gt_mask.shape:
        raise ValueError("masks must share geometry")
    if not gt_mask.any():
        raise ValueError("ground-truth mask is empty; IoU undefined")
    inter = int(np.count_nonzero(pred_mask & gt_mask))
    union = int(np.count_nonzero(pred_mask | gt_mask))
    return inter / union


def match_segments(pred: LabelMap, gt: LabelMap) -> IoUReport:
    """For each ground-truth segment keep the predicted segment with maximum
    IoU (ties: lowest predicted id); mean over ground-truth segments."""
    pred.validate()
    gt.validate()
    if pred.labels.shape != gt.labels.shape:
        raise ValueError("prediction and ground truth must share geometry")
    valid = gt.labels != VOID_LABEL
    pl = pred.labels[valid].astype(np.int64)
    gl = gt.labels[valid].astype(np.int64)
    pred_ids, pl_compact = np.unique(pl, return_inverse=True)
    num_gt = gt.num_labels
    joint = pl_compact * num_gt + gl
    counts = np.bincount(joint, minlength=len(pred_ids) * num_gt)
    counts = counts.reshape(len(pred_ids), num_gt)
    pred_sizes = counts.sum(axis=1)
    gt_sizes = np.bincount(gl, minlength=num_gt)

    entries: list[tuple[int, int, float]] = []
    for g in range(num_gt):
        inter = counts[:, g]
        union = pred_sizes + gt_sizes[g] - inter
        scores = inter / union
        best = int(np.argmax(scores))  # first max == lowest predicted id
        entries.append((g, int(pred_ids[best]), float(scores[best])))
    mean = sum(e[2] for e in entries) / len(entries)
    return IoUReport(per_gt_segment=entries, mean_iou=mean,
                     num_gt_segments=num_gt)


def dataset_iou(reports: list[IoUReport]) -> float:
    """Segment-weighted mean: flat average over every ground-truth segment."""
    if not reports:
        raise ValueError("no reports to aggregate")
    values = [entry[2] for report in reports for entry in report.per_gt_segment]
    return sum(values) / len(values)


# ---------------------------------------------------------------------------
# sweep harness


@dataclass(frozen=True)
class ManifestEntry:
    image_path: str
    fmap_path: str
    gt_paths: tuple[str, ...]


def read_manifest(path) -> list[ManifestEntry]:
    """One record per line: image<TAB>fmap<TAB>gt[<TAB>gt...]; relative paths
    resolve against the manifest's directory; blank and # lines skipped."""
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p: str) -> str:
        return p if os.path.isabs(p) else os.path.join(base, p)

    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 3:
                raise ValueError(
                    f"{path}:{lineno}: expected image<TAB>fmap<TAB>gt..., "
                    f"got {len(parts)} fields")
            entries.append(ManifestEntry(
                image_path=resolve(parts[0]), fmap_path=resolve(parts[1]),
                gt_paths=tuple(resolve(p) for p in parts[2:])))
    if not entries:
        raise ValueError(f"manifest {path} lists no images")
    return entries


@dataclass(frozen=True)
class SweepConfig:
    counts: tuple[int, ...]
    methods: tuple[str, ...] = SWEEP_METHODS
    seed: int = 0
    model_path: str | None = None
    compactness: float = 10.0
    slic_iterations: int = 10
    egs: EgsParams = EgsParams()
    kmeans_k: int = 256
    merge_mode: str = "adjacency"

    def validate(self) -> "SweepConfig":
        if not self.counts:
            raise ValueError("sweep needs at least one superpixel count")
        for method in self.methods:
            if method not in SWEEP_METHODS:
                raise ValueError(f"unknown method {method!r}")
        if not self.methods:
            raise ValueError("sweep needs at least one method")
        needs_model = {"proposed"} & set(self.methods)
        if needs_model and not self.model_path:
            raise ValueError("method 'proposed' requires a hash model")
        return self


def _task_seed(seed: int, count: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, count, index]).generate_state(1)[0])


def _predict(method: str, entry: ManifestEntry, count: int,
             config: SweepConfig, task_seed: int) -> LabelMap:
    image = read_image(entry.image_path)
    slic_params = SlicParams(num_superpixels=count,
                             compactness=config.compactness,
                             iterations=config.slic_iterations)
    if method == "slic":
        return slic(image, slic_params, task_seed)
    if method == "egs":
        return egs_segment(image, config.egs)
    fmap = read_feature_map(entry.fmap_path)
    if method == "proposed":
        model = _load_model_cached(config.model_path)
        result, _ = pipeline.segment_with_codes(
            image, fmap, model, slic_params, task_seed, config.merge_mode)
        return result.labels
    if method == "kmeans":
        superpixels = slic(image, slic_params, task_seed)
        k = config.kmeans_k
        # k cannot exceed the realized superpixel count; clamp and log
        if k > superpixels.num_labels:
            log.warning("clamping kmeans k=%d to %d superpixels on %s",
                        k, superpixels.num_labels, entry.image_path)
            k = superpixels.num_labels
        feats = upsample_features(fmap, image.height, image.width)
        sp_feats = superpixel_mean_features(superpixels, feats)
        rag = build_rag(superpixels)
        result = kmeans_merge(superpixels, sp_feats, k, task_seed, rag,
                              mode=config.merge_mode)
        return result.labels
    raise ValueError(f"unknown method {method!r}")


_MODEL_CACHE: dict[str, HashModel] = {}


def _load_model_cached(path: str) -> HashModel:
    model = _MODEL_CACHE.get(path)
    if model is None:
        model = load_model(path)
        _MODEL_CACHE[path] = model
    return model


def _run_task(args) -> tuple[int, list[dict]]:
    task_index, count, method, entry, config = args
    seed = _task_seed(config.seed, count, task_index)
    pred = _predict(method, entry, count, config, seed)
    records = []
    for gt_path in entry.gt_paths:
        gt = read_label_map(gt_path)
        report = match_segments(pred, gt)
        records.append({
            "image": entry.image_path, "gt": gt_path, "method": method,
            "count": count, "ious": [e[2] for e in report.per_gt_segment],
            "mean_iou": report.mean_iou,
        })
    return task_index, records


def sweep_superpixels(entries: list[ManifestEntry], config: SweepConfig,
                      jobs: int = 1) -> SweepResult:
    """Run every (count, method) cell over the dataset and aggregate with
    segment-weighted means. Images with missing ground truth are skipped
    with a warning and recorded in the details log. Deterministic for a
    fixed seed regardless of the level of parallelism."""
    config.validate()
    if not entries:
        raise ValueError("dataset is empty")

    usable: list[tuple[int, ManifestEntry]] = []
    skip_records = []
    for index, entry in enumerate(entries):
        missing = [p for p in entry.gt_paths if not os.path.exists(p)]
        if missing:
            log.warning("skipping %s: missing ground truth %s",
                        entry.image_path, missing[0])
            skip_records.append({"image": entry.image_path, "skipped": True,
                                 "reason": f"missing ground truth: {missing[0]}"})
            continue
        usable.append((index, entry))

    counts = tuple(sorted(config.counts))
    methods = tuple(sorted(config.methods))
    tasks = []
    for count in counts:
        for method in methods:
            for index, entry in usable:
                tasks.append((index, count, method, entry, config))

    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(_run_task, tasks, chunksize=1))
    else:
        outputs = [_run_task(task) for task in tasks]

    # canonical order: (count, method, image index, gt order)
    per_cell: dict[tuple[int, str], list[float]] = {}
    details = list(skip_records)
    for task, (_, records) in zip(tasks, outputs):
        _, count, method, _, _ = task
        for record in records:
            per_cell.setdefault((count, method), []).extend(record["ious"])
            details.append(record)

    rows = []
    for count in counts:
        for method in methods:
            values = per_cell.get((count, method), [])
            if not values:
                raise ValueError(
                    f"no evaluable images for count={count} method={method}")
            rows.append(SweepRow(superpixel_count=count, method=method,
                                 mean_iou_percent=100.0 * sum(values) / len(values)))
    return SweepResult(rows=rows, details=details)


def write_sweep_csv(result: SweepResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("count,method,mean_iou_percent\n")
        for row in result.rows:
            fh.write(f"{row.superpixel_count},{row.method},"
                     f"{row.mean_iou_percent:.2f}\n")


def write_sweep_details(result: SweepResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in result.details:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
