"""Superpixel merging driven by binary code maps: upsample per-location codes
to pixels, vote one code per superpixel, and fuse adjacent superpixels whose
codes agree exactly (zero Hamming distance). Also hosts the k-means merging
baseline, which reuses the same adjacency-merge semantics.
"""

from dataclasses import dataclass

import numpy as np

from .itq import BinaryCodeMap
from .tensor_io import VOID_LABEL, FeatureMap, LabelMap, relabel_first_seen
from .unionfind import UnionFind

MERGE_MODES = ("adjacency", "global")


@dataclass(frozen=True)
class RegionAdjacencyGraph:
    """4-adjacency between regions of a label map."""

    num_regions: int
    edges: frozenset

    def validate(self) -> "RegionAdjacencyGraph":
        if self.num_regions < 1:
            raise ValueError("num_regions must be positive")
        for a, b in self.edges:
            if a == b:
                raise ValueError("self-loop in adjacency graph")
            if not (0 <= a < self.num_regions and 0 <= b < self.num_regions):
                raise ValueError("edge endpoint out of range")
            if a > b:
                raise ValueError("edges must be stored as (low, high) pairs")
        return self


@dataclass
class SegmentationResult:
    """Final segments plus the provenance of each merge."""

    labels: LabelMap
    superpixel_codes: np.ndarray   # one code (or cluster id) per input superpixel
    merged_from: dict[int, set[int]]


def _reject_void(label_map: LabelMap, what: str) -> LabelMap:
    label_map.validate()
    if (label_map.labels == VOID_LABEL).any():
        raise ValueError(f"{what} must not contain void pixels")
    return label_map


def build_rag(superpixels: LabelMap) -> RegionAdjacencyGraph:
    """Edge (a, b) iff some pixel of a is 4-adjacent to some pixel of b."""
    _reject_void(superpixels, "superpixel map")
    labels = superpixels.labels
    n = superpixels.num_labels
    horiz_a, horiz_b = labels[:, :-1].ravel(), labels[:, 1:].ravel()
    vert_a, vert_b = labels[:-1, :].ravel(), labels[1:, :].ravel()
    a = np.concatenate([horiz_a, vert_a]).astype(np.int64)
    b = np.concatenate([horiz_b, vert_b]).astype(np.int64)
    differ = a != b
    lo = np.minimum(a[differ], b[differ])
    hi = np.maximum(a[differ], b[differ])
    packed = np.unique(lo * n + hi)
    edges = frozenset((int(p // n), int(p % n)) for p in packed)
    return RegionAdjacencyGraph(num_regions=n, edges=edges).validate()


def _nearest_indices(src: int, dst: int) -> np.ndarray:
    # pixel r maps to cell floor(r * src / dst)
    return (np.arange(dst, dtype=np.int64) * src) // dst


def upsample_codes(binmap: BinaryCodeMap, height: int, width: int) -> np.ndarray:
    """Nearest-neighbor expansion of the code grid onto the source pixel grid."""
    binmap.validate()
    if height != binmap.source_height or width != binmap.source_width:
        raise ValueError(
            f"target {height}x{width} does not match source geometry "
            f"{binmap.source_height}x{binmap.source_width}")
    ys = _nearest_indices(binmap.height, height)
    xs = _nearest_indices(binmap.width, width)
    return binmap.codes[np.ix_(ys, xs)]


def upsample_features(fmap: FeatureMap, height: int, width: int) -> np.ndarray:
    """Nearest-neighbor expansion of the feature grid, returns (H, W, C)."""
    fmap.validate()
    if height != fmap.source_height or width != fmap.source_width:
        raise ValueError(
            f"target {height}x{width} does not match source geometry "
            f"{fmap.source_height}x{fmap.source_width}")
    ys = _nearest_indices(fmap.height, height)
    xs = _nearest_indices(fmap.width, width)
    return np.transpose(fmap.data, (1, 2, 0))[np.ix_(ys, xs)]


def assign_superpixel_codes(superpixels: LabelMap, pixel_codes: np.ndarray,
                            code_len: int) -> np.ndarray:
    """Per-bit majority vote over each superpixel's member pixels; exact ties
    resolve to 0, matching the threshold function's bias at the boundary."""
    _reject_void(superpixels, "superpixel map")
    if pixel_codes.shape != superpixels.labels.shape:
        raise ValueError("pixel code grid does not match superpixel geometry")
    labels = superpixels.labels.ravel()
    codes = pixel_codes.ravel().astype(np.uint64)
    n = superpixels.num_labels
    sizes = np.bincount(labels, minlength=n)
    out = np.zeros(n, dtype=np.uint64)
    for bit in range(code_len):
        ones = np.bincount(labels,
                           weights=((codes >> np.uint64(bit)) & np.uint64(1)).astype(np.float64),
                           minlength=n)
        majority = ones * 2 > sizes
        out |= majority.astype(np.uint64) << np.uint64(bit)
    return out


def _components_to_result(superpixels: LabelMap, component_of: np.ndarray,
                          sp_codes: np.ndarray) -> SegmentationResult:
    final_per_pixel = component_of[superpixels.labels]
    dense, num = relabel_first_seen(final_per_pixel)
    labels = LabelMap(labels=dense, num_labels=num).validate()
    # final id of each superpixel: dense value at any of its pixels
    flat_sp = superpixels.labels.ravel()
    flat_final = dense.ravel()
    sp_final = np.zeros(superpixels.num_labels, dtype=np.int64)
    sp_final[flat_sp] = flat_final
    merged_from: dict[int, set[int]] = {i: set() for i in range(num)}
    for sp_id, final_id in enumerate(sp_final.tolist()):
        merged_from[final_id].add(sp_id)
    return SegmentationResult(labels=labels,
                              superpixel_codes=np.asarray(sp_codes).copy(),
                              merged_from=merged_from)


def merge_equal_codes(superpixels: LabelMap, sp_codes: np.ndarray,
                      adjacency: RegionAdjacencyGraph,
                      mode: str = "adjacency") -> SegmentationResult:
    """Fuse superpixels whose codes are identical.

    "adjacency" merges connected components of the equal-code subgraph of
    the RAG; "global" pools equal codes regardless of adjacency.
    """
    _reject_void(superpixels, "superpixel map")
    adjacency.validate()
    sp_codes = np.asarray(sp_codes)
    n = superpixels.num_labels
    if len(sp_codes) != n:
        raise ValueError("need exactly one code per superpixel")
    if adjacency.num_regions != n:
        raise ValueError("adjacency graph does not match superpixel count")
    if mode not in MERGE_MODES:
        raise ValueError(f"unknown merge mode {mode!r}")

    if mode == "adjacency":
        uf = UnionFind(n)
        for a, b in sorted(adjacency.edges):
            if sp_codes[a] == sp_codes[b]:
                uf.union(a, b)
        component_of = uf.roots()
    else:
        _, component_of = np.unique(sp_codes, return_inverse=True)
        component_of = component_of.astype(np.int64)
    return _components_to_result(superpixels, component_of, sp_codes)


def superpixel_mean_features(superpixels: LabelMap,
                             pixel_features: np.ndarray) -> np.ndarray:
    """Arithmetic mean of member pixels' feature vectors, (num_labels, D)."""
    _reject_void(superpixels, "superpixel map")
    if pixel_features.shape[:2] != superpixels.labels.shape:
        raise ValueError("feature grid does not match superpixel geometry")
    labels = superpixels.labels.ravel()
    feats = pixel_features.reshape(len(labels), -1).astype(np.float64)
    n = superpixels.num_labels
    order = np.argsort(labels, kind="stable")
    sorted_labels = labels[order]
    boundaries = np.searchsorted(sorted_labels, np.arange(n))
    sums = np.add.reduceat(feats[order], boundaries, axis=0)
    counts = np.bincount(labels, minlength=n).astype(np.float64)
    return sums / counts[:, None]


def _kmeans_pp_init(features: np.ndarray, k: int,
                    rng: np.random.Generator) -> np.ndarray:
    n = len(features)
    chosen = [int(rng.integers(n))]
    d2 = ((features - features[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            # all remaining mass at zero distance: take the lowest unchosen id
            remaining = sorted(set(range(n)) - set(chosen))
            pick = remaining[0]
        else:
            pick = int(rng.choice(n, p=d2 / total))
        chosen.append(pick)
        d2 = np.minimum(d2, ((features - features[pick]) ** 2).sum(axis=1))
    return features[chosen].copy()


def kmeans_merge(superpixels: LabelMap, sp_features: np.ndarray, k: int,
                 seed: int, adjacency: RegionAdjacencyGraph,
                 mode: str = "adjacency",
                 max_iterations: int = 300,
                 tolerance: float = 1e-6) -> SegmentationResult:
    """Cluster superpixel features with seeded k-means++ and Lloyd iterations,
    then merge same-cluster superpixels with the equal-code semantics."""
    _reject_void(superpixels, "superpixel map")
    features = np.asarray(sp_features, dtype=np.float64)
    n = superpixels.num_labels
    if features.ndim != 2 or len(features) != n:
        raise ValueError("need one feature vector per superpixel")
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")

    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(features, k, rng)
    sq = (features ** 2).sum(axis=1)
    assign = np.zeros(n, dtype=np.int64)
    for _ in range(max_iterations):
        d2 = sq[:, None] - 2.0 * features @ centroids.T + (centroids ** 2).sum(axis=1)
        assign = np.argmin(d2, axis=1)
        new_centroids = centroids.copy()
        counts = np.bincount(assign, minlength=k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, assign, features)
        filled = counts > 0
        new_centroids[filled] = sums[filled] / counts[filled, None]
        shift = np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max()
        centroids = new_centroids
        if shift < tolerance:
            break
    d2 = sq[:, None] - 2.0 * features @ centroids.T + (centroids ** 2).sum(axis=1)
    assign = np.argmin(d2, axis=1)

    if mode not in MERGE_MODES:
        raise ValueError(f"unknown merge mode {mode!r}")
    return merge_equal_codes(superpixels, assign.astype(np.uint64),
                             adjacency, mode=mode)
