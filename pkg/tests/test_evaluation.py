import json
from fractions import Fraction

import numpy as np
import pytest

from binseg import (EgsParams, IoUReport, LabelMap, ManifestEntry,
                    RasterImage, SweepConfig, dataset_iou, iou,
                    match_segments, read_manifest, sweep_superpixels,
                    write_feature_map, write_image, write_label_map)
from binseg.evaluation import write_sweep_csv, write_sweep_details
from binseg.tensor_io import VOID_LABEL
from synthetic_data import pseudo_feature_map


def _lm(array):
    labels = np.asarray(array, np.int32)
    real = labels[labels != VOID_LABEL]
    return LabelMap(labels=labels, num_labels=int(real.max()) + 1).validate()


def _mask(shape, points):
    mask = np.zeros(shape, bool)
    for y, x in points:
        mask[y, x] = True
    return mask


# ---------------------------------------------------------------------------
# iou


def test_iou_spot_values():
    shape = (2, 2)
    a = _mask(shape, [(0, 0), (0, 1)])
    b = _mask(shape, [(0, 1), (1, 1)])
    assert iou(a, a) == 1.0
    assert iou(a, _mask(shape, [(1, 0), (1, 1)])) == 0.0
    assert iou(a, b) == 1 / 3


def test_iou_symmetric():
    rng = np.random.default_rng(60)
    for _ in range(20):
        a = rng.random((5, 5)) < 0.5
        b = rng.random((5, 5)) < 0.5
        if not (a.any() and b.any()):
            continue
        assert iou(a, b) == iou(b, a)
        assert 0.0 <= iou(a, b) <= 1.0


def test_iou_undefined_inputs():
    empty = np.zeros((2, 2), bool)
    with pytest.raises(ValueError):
        iou(empty, empty)
    with pytest.raises(ValueError):
        iou(_mask((2, 2), [(0, 0)]), empty)
    with pytest.raises(ValueError):
        iou(np.zeros((2, 2), bool), np.ones((3, 3), bool))


# ---------------------------------------------------------------------------
# match_segments


def test_match_perfect_prediction():
    rng = np.random.default_rng(61)
    labels = rng.integers(0, 3, (6, 6)).astype(np.int32)
    labels.flat[:3] = [0, 1, 2]
    gt = _lm(labels)
    report = match_segments(gt, gt)
    assert report.mean_iou == 1.0
    assert all(entry[2] == 1.0 for entry in report.per_gt_segment)
    assert [entry[0] for entry in report.per_gt_segment] == [0, 1, 2]


def test_match_whole_image_against_halves():
    pred = _lm(np.zeros((4, 4), np.int32))
    gt_labels = np.zeros((4, 4), np.int32)
    gt_labels[:, 2:] = 1
    report = match_segments(pred, _lm(gt_labels))
    assert [entry[2] for entry in report.per_gt_segment] == [0.5, 0.5]
    assert report.mean_iou == 0.5


def _match_oracle(pred, gt):
    """Brute force with rational comparisons: per GT segment, max IoU over
    every predicted segment, ties by lowest predicted id."""
    valid = gt.labels != VOID_LABEL
    entries = []
    for g in range(gt.num_labels):
        gmask = (gt.labels == g) & valid
        best_id, best = None, Fraction(-1)
        for p in np.unique(pred.labels[valid]):
            pmask = (pred.labels == p) & valid
            inter = int((gmask & pmask).sum())
            union = int((gmask | pmask).sum())
            score = Fraction(inter, union)
            if score > best:
                best_id, best = int(p), score
        entries.append((g, best_id, best))
    return entries


def test_match_equals_brute_force_oracle():
    rng = np.random.default_rng(62)
    for _ in range(50):
        pred = _lm(_dense(rng.integers(0, 6, (16, 16))))
        gt = _lm(_dense(rng.integers(0, 5, (16, 16))))
        report = match_segments(pred, gt)
        oracle = _match_oracle(pred, gt)
        assert len(report.per_gt_segment) == len(oracle)
        for (g, p, value), (og, op, oscore) in zip(report.per_gt_segment, oracle):
            assert (g, p) == (og, op)
            assert value == float(oscore.numerator / oscore.denominator)


def _dense(labels):
    from binseg.tensor_io import relabel_first_seen
    return relabel_first_seen(labels)[0]


def test_match_excludes_void_pixels():
    gt = _lm([[0, VOID_LABEL], [1, 1]])
    pred = _lm([[0, 0], [1, 1]])
    report = match_segments(pred, gt)
    # pred segment 0 overlaps gt 0 only on the one valid pixel
    assert report.per_gt_segment[0] == (0, 0, 1.0)
    assert report.per_gt_segment[1] == (1, 1, 1.0)
    assert report.mean_iou == 1.0


def test_match_geometry_mismatch():
    with pytest.raises(ValueError):
        match_segments(_lm(np.zeros((2, 2), np.int32)),
                       _lm(np.zeros((2, 3), np.int32)))


def test_match_total_over_random_refinements():
    """Splitting predicted segments never breaks matching: every refinement
    evaluates without error and every IoU stays in [0, 1]."""
    rng = np.random.default_rng(64)
    for _ in range(25):
        gt = _lm(_dense(rng.integers(0, 4, (12, 12))))
        pred = _lm(_dense(rng.integers(0, 4, (12, 12))))
        # refine pred by splitting each segment with a random sub-id
        sub = rng.integers(0, 3, (12, 12))
        refined = _lm(_dense(pred.labels.astype(np.int64) * 3 + sub))
        for candidate in (pred, refined):
            report = match_segments(candidate, gt)
            assert len(report.per_gt_segment) == gt.num_labels
            assert all(0.0 <= e[2] <= 1.0 for e in report.per_gt_segment)
        base = match_segments(pred, gt)
        fine = match_segments(refined, gt)
        # a refinement cannot improve a ground-truth segment that some
        # predicted segment already matched exactly
        for (g, _, value), (_, _, fine_value) in zip(base.per_gt_segment,
                                                     fine.per_gt_segment):
            if value == 1.0:
                assert fine_value <= 1.0


# ---------------------------------------------------------------------------
# dataset aggregation


def test_dataset_iou_single_report_is_its_mean():
    report = match_segments(_lm(np.zeros((2, 2), np.int32)),
                            _lm(np.zeros((2, 2), np.int32)))
    assert dataset_iou([report]) == report.mean_iou


def test_dataset_iou_is_segment_weighted():
    r1 = IoUReport(per_gt_segment=[(0, 0, 1.0)], mean_iou=1.0,
                   num_gt_segments=1)
    r2 = IoUReport(per_gt_segment=[(0, 0, 0.0), (1, 0, 0.0)], mean_iou=0.0,
                   num_gt_segments=2)
    assert dataset_iou([r1, r2]) == (1.0 + 0.0 + 0.0) / 3
    assert dataset_iou([r1, r2]) != (1.0 + 0.0) / 2


def test_dataset_iou_equals_flat_concatenation():
    rng = np.random.default_rng(63)
    reports = []
    flat = []
    for _ in range(7):
        values = rng.random(int(rng.integers(1, 6))).tolist()
        flat.extend(values)
        reports.append(IoUReport(
            per_gt_segment=[(i, 0, v) for i, v in enumerate(values)],
            mean_iou=sum(values) / len(values), num_gt_segments=len(values)))
    assert dataset_iou(reports) == sum(flat) / len(flat)


def test_dataset_iou_empty_errors():
    with pytest.raises(ValueError):
        dataset_iou([])


# ---------------------------------------------------------------------------
# sweep


def _write_uniform_case(tmp_path, name, value):
    image = RasterImage(pixels=np.full((24, 24, 3), value, np.uint8))
    write_image(image, tmp_path / f"{name}.ppm")
    write_feature_map(pseudo_feature_map(image), tmp_path / f"{name}.fmap")
    gt = LabelMap(labels=np.zeros((24, 24), np.int32), num_labels=1)
    write_label_map(gt, tmp_path / f"{name}.pgm")


def test_sweep_uniform_image_scores_100(tmp_path):
    _write_uniform_case(tmp_path, "a", 40)
    manifest = tmp_path / "data.tsv"
    manifest.write_text("a.ppm\ta.fmap\ta.pgm\n")
    entries = read_manifest(manifest)
    config = SweepConfig(counts=(1,), methods=("slic", "egs", "kmeans"),
                         egs=EgsParams())
    result = sweep_superpixels(entries, config)
    assert len(result.rows) == 3
    for row in result.rows:
        assert row.mean_iou_percent == 100.0

    csv_path = tmp_path / "out.csv"
    write_sweep_csv(result, csv_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "count,method,mean_iou_percent"
    assert lines[1] == "1,egs,100.00"
    assert len(lines) == 4


def test_sweep_skips_missing_gt_with_record(tmp_path, caplog):
    _write_uniform_case(tmp_path, "a", 40)
    _write_uniform_case(tmp_path, "b", 200)
    manifest = tmp_path / "data.tsv"
    manifest.write_text("a.ppm\ta.fmap\ta.pgm\n"
                        "b.ppm\tb.fmap\tmissing.pgm\n")
    entries = read_manifest(manifest)
    config = SweepConfig(counts=(1,), methods=("slic",))
    with caplog.at_level("WARNING"):
        result = sweep_superpixels(entries, config)
    assert any("missing ground truth" in r.message for r in caplog.records)
    skips = [d for d in result.details if d.get("skipped")]
    assert len(skips) == 1 and "missing.pgm" in skips[0]["reason"]
    assert len(result.rows) == 1

    details_path = tmp_path / "d.jsonl"
    write_sweep_details(result, details_path)
    records = [json.loads(line) for line in details_path.read_text().splitlines()]
    assert records[0]["skipped"] is True
    assert records[1]["method"] == "slic"
    assert records[1]["ious"] == [1.0]


def test_sweep_requires_model_for_proposed():
    entry = ManifestEntry(image_path="x", fmap_path="y", gt_paths=("z",))
    with pytest.raises(ValueError):
        sweep_superpixels([entry], SweepConfig(counts=(1,),
                                               methods=("proposed",)))


def test_manifest_parsing(tmp_path):
    path = tmp_path / "m.tsv"
    path.write_text("# comment\n\nimg.ppm\tf.fmap\tg1.pgm\tg2.pgm\n")
    entries = read_manifest(path)
    assert len(entries) == 1
    assert entries[0].gt_paths == (str(tmp_path / "g1.pgm"),
                                   str(tmp_path / "g2.pgm"))
    bad = tmp_path / "bad.tsv"
    bad.write_text("only\ttwo\n")
    with pytest.raises(ValueError):
        read_manifest(bad)
