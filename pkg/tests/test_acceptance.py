"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with `pytest -s tests/test_acceptance.py` to see them
inline).

Known red: the EGS two-tone check encodes the idealized expectation of two
segments, but the greedy merge rule provably cannot produce it for any k --
Gaussian pre-smoothing turns the hard step into one-column intensity bands
whose merge thresholds are never met, and the bands exceed the min-size
floor. The test stays red deliberately to document the gap instead of
papering over it; everything else must pass.
"""

import contextlib
import itertools
import time
from fractions import Fraction

import numpy as np
import pytest

import binseg
from binseg import (EgsParams, LabelMap, RasterImage, SlicParams,
                    egs_segment, fit_pca, match_segments, slic, train_itq)
from binseg.cli import main
from binseg.tensor_io import relabel_first_seen
from synthetic_data import make_dataset, make_shapes_image, pseudo_feature_map

pytestmark = pytest.mark.acceptance


@contextlib.contextmanager
def criterion(name):
    try:
        yield
    except pytest.skip.Exception:
        print(f"[ACCEPTANCE] {name}: SKIP")
        raise
    except BaseException:
        print(f"[ACCEPTANCE] {name}: FAIL")
        raise
    else:
        print(f"[ACCEPTANCE] {name}: PASS")


# ---------------------------------------------------------------------------
# 1. ITQ correctness


def test_itq_correctness():
    with criterion("itq-correctness"):
        start = time.perf_counter()
        n, dim, bits = 1000, 32, 8
        tol = 1e-9 * n * bits
        improved = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            samples = rng.standard_normal((n, dim))
            mean, projection = fit_pca(samples, bits)
            v = (samples - mean) @ projection
            baseline = float(((np.where(v >= 0, 1.0, -1.0) - v) ** 2).sum())
            rotation, report = train_itq(v, iterations=50, seed=seed + 10_000,
                                         track_rotations=True)
            for prev, cur in zip(report.loss_per_iter,
                                 report.loss_per_iter[1:]):
                assert cur <= prev + tol
            for r in report.rotations:
                assert np.abs(r.T @ r - np.eye(bits)).max() <= 1e-6
            if report.loss_per_iter[-1] < baseline:
                improved += 1
        elapsed = time.perf_counter() - start
        assert improved >= 95, f"improved in only {improved}/100 seeds"
        assert elapsed < 10.0, f"took {elapsed:.2f}s"


# ---------------------------------------------------------------------------
# 2. Threshold-function conformance


def test_threshold_function_conformance():
    with criterion("threshold-conformance"):
        start = time.perf_counter()
        rng = np.random.default_rng(1234)
        dim, bits = 16, 8
        checked = 0
        for _ in range(100):
            q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
            r, _ = np.linalg.qr(rng.standard_normal((bits, bits)))
            model = binseg.HashModel.from_arrays(rng.standard_normal(dim),
                                                 q[:, :bits], r)
            weights = model.weights()
            for _ in range(100):
                x = rng.standard_normal(dim) * 2.0
                code = binseg.encode_vector(model, x)
                t = (x - model.mean.astype(np.float64)) @ weights
                v = 1.0 / (1.0 + np.exp(-t))
                for i in range(bits):
                    bit = (code >> i) & 1
                    assert (bit == 0) == (v[i] <= 0.5)
                    if t[i] != 0.0:
                        assert bit == int(t[i] > 0)
                checked += 1
        elapsed = time.perf_counter() - start
        assert checked == 10_000
        assert elapsed < 1.0, f"took {elapsed:.2f}s"


# ---------------------------------------------------------------------------
# 3 + 4. IoU matching vs brute force, and spot values


def _random_label_map(rng, num_values):
    raw = rng.integers(0, num_values, (16, 16))
    dense, num = relabel_first_seen(raw)
    return LabelMap(labels=dense, num_labels=num).validate()


def _match_oracle(pred, gt):
    entries = []
    for g in range(gt.num_labels):
        gmask = gt.labels == g
        best_id, best = None, Fraction(-1)
        for p in range(pred.num_labels):
            pmask = pred.labels == p
            score = Fraction(int((gmask & pmask).sum()),
                             int((gmask | pmask).sum()))
            if score > best:
                best_id, best = p, score
        entries.append((g, best_id, best))
    return entries


def test_iou_matching_equals_brute_force():
    with criterion("iou-oracle-equivalence"):
        start = time.perf_counter()
        rng = np.random.default_rng(77)
        for _ in range(500):
            pred = _random_label_map(rng, int(rng.integers(1, 8)))
            gt = _random_label_map(rng, int(rng.integers(1, 8)))
            report = match_segments(pred, gt)
            for entry, (g, p, score) in zip(report.per_gt_segment,
                                            _match_oracle(pred, gt)):
                assert entry[0] == g and entry[1] == p
                assert entry[2] == score.numerator / score.denominator
        elapsed = time.perf_counter() - start
        assert elapsed < 5.0, f"took {elapsed:.2f}s"


def test_iou_spot_values():
    with criterion("iou-spot-values"):
        a = np.zeros((2, 2), bool)
        a[0, 0] = a[0, 1] = True
        b = np.zeros((2, 2), bool)
        b[0, 1] = b[1, 1] = True
        assert binseg.iou(a, b) == 1 / 3
        assert binseg.iou(a, a) == 1.0
        disjoint = np.zeros((2, 2), bool)
        disjoint[1, 0] = True
        assert binseg.iou(a, disjoint) == 0.0


# ---------------------------------------------------------------------------
# 5. Partition invariants


def _synthetic_family(count=50):
    for i in range(count):
        seed = 2000 + i
        rng = np.random.default_rng(seed)
        h = int(rng.integers(48, 97))
        w = int(rng.integers(48, 97))
        image, _ = make_shapes_image(seed, h, w)
        if i % 2 == 1:
            noise = rng.normal(0.0, 8.0, image.pixels.shape)
            image = RasterImage(pixels=np.clip(
                image.pixels.astype(np.float64) + noise, 0, 255).astype(np.uint8))
        yield seed, image


def test_partition_invariants():
    with criterion("partition-invariants"):
        k = 100
        for seed, image in _synthetic_family():
            sp = slic(image, SlicParams(num_superpixels=k), seed)
            sp.validate()
            assert 0.5 * k <= sp.num_labels <= 1.5 * k, \
                f"seed {seed}: {sp.num_labels} superpixels for K={k}"
            egs_segment(image, EgsParams()).validate()
        constant = RasterImage(pixels=np.full((32, 32, 3), 180, np.uint8))
        assert egs_segment(constant, EgsParams()).num_labels == 1


def test_partition_invariants_egs_two_tone():
    """Documents the idealized two-segment expectation for this input. The
    merge rule provably cannot reach it for any k (the smoothing skirt bands
    survive as segments), so this stays red on purpose; see the module
    docstring."""
    with criterion("partition-invariants-egs-two-tone"):
        pixels = np.zeros((64, 64, 3), np.uint8)
        pixels[:, 32:] = 255
        labels = egs_segment(RasterImage(pixels=pixels),
                             EgsParams(sigma=1.0, k=100.0, min_size=20))
        assert labels.num_labels == 2, \
            f"faithful merge rule yields {labels.num_labels} segments"


# ---------------------------------------------------------------------------
# 6. Merge semantics


def _cc_oracle(n, edges, codes):
    reach = np.eye(n, dtype=bool)
    for a, b in edges:
        if codes[a] == codes[b]:
            reach[a, b] = reach[b, a] = True
    for mid in range(n):
        for a in range(n):
            if reach[a, mid]:
                reach[a] |= reach[mid]
    return {frozenset(np.nonzero(reach[a])[0].tolist()) for a in range(n)}


def test_merge_semantics():
    with criterion("merge-semantics"):
        rng = np.random.default_rng(99)
        for _ in range(200):
            n = int(rng.integers(1, 13))
            pairs = list(itertools.combinations(range(n), 2))
            keep = rng.random(len(pairs)) < 0.35
            edges = frozenset(p for p, used in zip(pairs, keep) if used)
            codes = rng.integers(0, 3, n).astype(np.uint64)
            sp = LabelMap(labels=np.arange(n, dtype=np.int32)[None, :],
                          num_labels=n)
            rag = binseg.RegionAdjacencyGraph(num_regions=n, edges=edges)
            result = binseg.merge_equal_codes(sp, codes, rag)
            assert result.labels.num_labels <= n
            groups = {frozenset(m) for m in result.merged_from.values()}
            assert groups == _cc_oracle(n, edges, codes)
            # idempotence: re-merging the output over the quotient of the
            # original adjacency changes nothing
            final_of = np.zeros(n, np.int64)
            for final_id, members in result.merged_from.items():
                for sp_id in members:
                    final_of[sp_id] = final_id
            inherited = np.zeros(result.labels.num_labels, np.uint64)
            for final_id, members in result.merged_from.items():
                inherited[final_id] = codes[min(members)]
            quotient = frozenset(
                (min(final_of[a], final_of[b]), max(final_of[a], final_of[b]))
                for a, b in edges if final_of[a] != final_of[b])
            again = binseg.merge_equal_codes(
                result.labels, inherited,
                binseg.RegionAdjacencyGraph(
                    num_regions=result.labels.num_labels, edges=quotient))
            assert np.array_equal(again.labels.labels, result.labels.labels)


# ---------------------------------------------------------------------------
# 7. End-to-end synthetic gain


def test_end_to_end_synthetic_gain():
    with criterion("end-to-end-synthetic-gain"):
        start = time.perf_counter()
        images, gts, fmaps = make_dataset(20)
        rng = np.random.default_rng(7)
        vectors = np.concatenate(
            [fmap.data.reshape(16, -1).T for fmap in fmaps])
        corpus = vectors[rng.choice(len(vectors), 3000, replace=False)]
        model, _ = binseg.train_hash_model(corpus, code_len=8,
                                           iterations=50, seed=7)
        params = SlicParams(num_superpixels=200)
        wins = 0
        for i in range(20):
            result, superpixels = binseg.segment_with_codes(
                images[i], fmaps[i], model, params, seed=i)
            merged = match_segments(result.labels, gts[i]).mean_iou
            raw = match_segments(superpixels, gts[i]).mean_iou
            wins += int(merged > raw)
        elapsed = time.perf_counter() - start
        assert wins >= 18, f"merged IoU beat raw SLIC on only {wins}/20 images"
        assert elapsed < 60.0, f"took {elapsed:.2f}s"


# ---------------------------------------------------------------------------
# 8. CLI determinism


def _prepare_cli_inputs(root):
    rng = np.random.default_rng(0)
    names = []
    vectors = []
    for i, seed in enumerate((900, 902, 903)):
        image, gt = make_shapes_image(seed)
        fmap = pseudo_feature_map(image)
        binseg.write_image(image, root / f"img{i}.ppm")
        binseg.write_feature_map(fmap, root / f"img{i}.fmap")
        binseg.write_label_map(gt, root / f"img{i}.pgm")
        vectors.append(fmap.data.reshape(16, -1).T)
        names.append(i)
    corpus = np.concatenate(vectors)
    corpus = corpus[rng.choice(len(corpus), 800, replace=False)]
    binseg.write_feature_matrix(corpus, root / "corpus.fvec")
    manifest = root / "data.tsv"
    manifest.write_text("".join(
        f"img{i}.ppm\timg{i}.fmap\timg{i}.pgm\n" for i in names))
    return manifest


def _run_twice(argv, outputs):
    blobs = []
    for attempt in range(2):
        for path in outputs:
            if path.exists():
                path.unlink()
        assert main(argv) == 0
        blobs.append(tuple(path.read_bytes() for path in outputs))
    assert blobs[0] == blobs[1], f"outputs differ across runs: {argv[0]}"
    return blobs[0]


def test_cli_determinism(tmp_path, capsys):
    with criterion("cli-determinism"):
        manifest = _prepare_cli_inputs(tmp_path)
        model = tmp_path / "model.itq"
        _run_twice(["train-itq", str(tmp_path / "corpus.fvec"),
                    "--code-len", "8", "--iters", "30", "--seed", "5",
                    "--out", str(model)], [model])
        _run_twice(["encode", str(tmp_path / "img0.fmap"), "--model",
                    str(model), "--out", str(tmp_path / "c.bmap")],
                   [tmp_path / "c.bmap"])
        _run_twice(["slic", str(tmp_path / "img0.ppm"), "--superpixels", "80",
                    "--seed", "3", "--out", str(tmp_path / "sp.pgm")],
                   [tmp_path / "sp.pgm"])
        _run_twice(["egs", str(tmp_path / "img0.ppm"),
                    "--out", str(tmp_path / "egs.pgm")], [tmp_path / "egs.pgm"])
        _run_twice(["segment", str(tmp_path / "img0.ppm"),
                    str(tmp_path / "img0.fmap"), "--model", str(model),
                    "--superpixels", "80", "--seed", "3",
                    "--out", str(tmp_path / "seg.pgm")],
                   [tmp_path / "seg.pgm",
                    tmp_path / "seg.pgm.txt"])
        _run_twice(["kmeans-baseline", str(tmp_path / "img0.ppm"),
                    str(tmp_path / "img0.fmap"), "--superpixels", "60",
                    "--kmeans-k", "8", "--seed", "3",
                    "--out", str(tmp_path / "km.pgm")],
                   [tmp_path / "km.pgm", tmp_path / "km.pgm.txt"])

        capsys.readouterr()
        assert main(["eval", str(tmp_path / "img0.pgm"),
                     str(tmp_path / "img0.pgm")]) == 0
        first = capsys.readouterr().out
        assert main(["eval", str(tmp_path / "img0.pgm"),
                     str(tmp_path / "img0.pgm")]) == 0
        assert capsys.readouterr().out == first

        sweep_argv = ["sweep", str(manifest), "--model", str(model),
                      "--counts", "50,100", "--seed", "5",
                      "--out", str(tmp_path / "sweep.csv")]
        serial = _run_twice(sweep_argv + ["--jobs", "1"],
                            [tmp_path / "sweep.csv",
                             tmp_path / "sweep.csv.jsonl"])
        parallel = _run_twice(sweep_argv + ["--jobs", "4"],
                              [tmp_path / "sweep.csv",
                               tmp_path / "sweep.csv.jsonl"])
        assert serial == parallel, "sweep differs between --jobs 1 and --jobs 4"


# ---------------------------------------------------------------------------
# secondary, dataset-scale (not desk-runnable here)


def test_dataset_scale_directional_check():
    with criterion("secondary-dataset-scale-directional"):
        pytest.skip("needs extracted AlexNet features for >= 50 MSRC images; "
                    "run the extractor package and `binseg sweep` per README")


def test_sweep_shape_interior_maximum():
    with criterion("secondary-sweep-shape"):
        pytest.skip("needs the MSRC subset; the sweep CSV reports the "
                    "per-count curve for inspection")
