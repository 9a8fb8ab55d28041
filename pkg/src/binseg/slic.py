"""SLIC superpixels: grid-seeded local k-means in CIELAB-xy space with
4-connectivity enforcement. Initializes the merging pipeline and doubles
as the raw-superpixel baseline.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .tensor_io import LabelMap, RasterImage, relabel_first_seen
from .unionfind import UnionFind

log = logging.getLogger("binseg.slic")

# sRGB -> XYZ (D65) matrix and reference white
_RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
_WHITE = np.array([0.95047, 1.0, 1.08883])


@dataclass(frozen=True)
class SlicParams:
    num_superpixels: int
    compactness: float = 10.0
    iterations: int = 10
    min_region_frac: float = 0.25

    def validate(self, pixel_count: int) -> "SlicParams":
        if self.num_superpixels < 1:
            raise ValueError("num_superpixels must be positive")
        if self.num_superpixels > pixel_count:
            raise ValueError("num_superpixels exceeds pixel count")
        if self.compactness <= 0:
            raise ValueError("compactness must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 < self.min_region_frac <= 1:
            raise ValueError("min_region_frac must be in (0, 1]")
        return self


def rgb_to_lab(image: RasterImage) -> np.ndarray:
    """sRGB to D65 CIELAB, returned as (H, W, 3) float64 with L in [0, 100]."""
    image.validate()
    srgb = image.pixels.astype(np.float64) / 255.0
    linear = np.where(srgb <= 0.04045, srgb / 12.92,
                      ((srgb + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _RGB_TO_XYZ.T
    ratio = xyz / _WHITE
    cube = 6.0 / 29.0
    f = np.where(ratio > cube ** 3, np.cbrt(ratio),
                 ratio / (3 * cube ** 2) + 4.0 / 29.0)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def _gradient_magnitude(lab: np.ndarray) -> np.ndarray:
    """Squared Lab gradient via central differences, edges clamped."""
    h, w = lab.shape[:2]
    xp = np.clip(np.arange(w) + 1, 0, w - 1)
    xm = np.clip(np.arange(w) - 1, 0, w - 1)
    yp = np.clip(np.arange(h) + 1, 0, h - 1)
    ym = np.clip(np.arange(h) - 1, 0, h - 1)
    dx = lab[:, xp, :] - lab[:, xm, :]
    dy = lab[yp, :, :] - lab[ym, :, :]
    return (dx ** 2).sum(axis=2) + (dy ** 2).sum(axis=2)


def _seed_centers(lab: np.ndarray, k: int) -> np.ndarray:
    """Grid seeds spaced to roughly k cells, perturbed to the lowest-gradient
    pixel in each seed's 3x3 neighborhood. Returns (n, 5) [y, x, l, a, b]."""
    h, w = lab.shape[:2]
    ny = min(h, max(1, round(math.sqrt(k * h / w))))
    nx = min(w, max(1, round(k / ny)))
    grad = _gradient_magnitude(lab)
    centers = np.empty((ny * nx, 5), dtype=np.float64)
    i = 0
    for gy in range(ny):
        y = min(h - 1, int((gy + 0.5) * h / ny))
        for gx in range(nx):
            x = min(w - 1, int((gx + 0.5) * w / nx))
            r0, r1 = max(0, y - 1), min(h, y + 2)
            c0, c1 = max(0, x - 1), min(w, x + 2)
            window = grad[r0:r1, c0:c1]
            dy, dx = np.unravel_index(int(np.argmin(window)), window.shape)
            py, px = r0 + int(dy), c0 + int(dx)
            centers[i] = (py, px, *lab[py, px])
            i += 1
    return centers


def slic(image: RasterImage, params: SlicParams, seed: int = 0) -> LabelMap:
    """Superpixel partition of the image.

    The seed parameter is accepted for interface uniformity; the algorithm
    is deterministic (grid seeding, fixed iteration order), so any seed
    yields the same partition.
    """
    del seed
    image.validate()
    h, w = image.height, image.width
    n = h * w
    params.validate(n)
    k = params.num_superpixels
    lab = rgb_to_lab(image)
    spacing = math.sqrt(n / k)
    centers = _seed_centers(lab, k)
    m2_over_s2 = (params.compactness ** 2) / (spacing ** 2)

    ys = np.arange(h, dtype=np.float64)
    xs = np.arange(w, dtype=np.float64)
    labels = np.full((h, w), -1, dtype=np.int32)
    for _ in range(params.iterations):
        best = np.full((h, w), np.inf)
        labels.fill(-1)
        for idx in range(len(centers)):
            cy, cx = centers[idx, 0], centers[idx, 1]
            r0 = max(0, int(math.floor(cy - spacing)))
            r1 = min(h, int(math.floor(cy + spacing)) + 1)
            c0 = max(0, int(math.floor(cx - spacing)))
            c1 = min(w, int(math.floor(cx + spacing)) + 1)
            if r0 >= r1 or c0 >= c1:
                continue
            dlab = lab[r0:r1, c0:c1, :] - centers[idx, 2:5]
            d2 = (dlab ** 2).sum(axis=2)
            d2 += ((ys[r0:r1, None] - cy) ** 2
                   + (xs[None, c0:c1] - cx) ** 2) * m2_over_s2
            window = best[r0:r1, c0:c1]
            better = d2 < window
            window[better] = d2[better]
            labels[r0:r1, c0:c1][better] = idx

        _assign_orphans(labels, lab, centers, m2_over_s2)
        flat = labels.ravel()
        counts = np.bincount(flat, minlength=len(centers)).astype(np.float64)
        filled = counts > 0
        feats = np.concatenate([
            np.repeat(ys, w)[:, None], np.tile(xs, h)[:, None],
            lab.reshape(n, 3)], axis=1)
        for col in range(5):
            sums = np.bincount(flat, weights=feats[:, col], minlength=len(centers))
            centers[filled, col] = sums[filled] / counts[filled]

    dense, num = relabel_first_seen(labels)
    min_size = math.ceil(params.min_region_frac * n / k)
    result = enforce_connectivity(LabelMap(labels=dense, num_labels=num), min_size)
    ratio = result.num_labels / k
    if not 0.5 <= ratio <= 1.5:
        log.warning("superpixel count %d deviates from target %d",
                    result.num_labels, k)
    return result


def _assign_orphans(labels, lab, centers, m2_over_s2) -> None:
    """Pixels missed by every search window get the nearest center overall."""
    orphan_mask = labels < 0
    if not orphan_mask.any():
        return
    oy, ox = np.nonzero(orphan_mask)
    pts = np.concatenate([lab[oy, ox, :],
                          np.stack([oy, ox], axis=1).astype(np.float64)], axis=1)
    best = np.full(len(oy), np.inf)
    pick = np.zeros(len(oy), dtype=np.int32)
    for idx in range(len(centers)):
        d2 = ((pts[:, :3] - centers[idx, 2:5]) ** 2).sum(axis=1)
        d2 += ((pts[:, 3] - centers[idx, 0]) ** 2
               + (pts[:, 4] - centers[idx, 1]) ** 2) * m2_over_s2
        better = d2 < best
        best[better] = d2[better]
        pick[better] = idx
    labels[oy, ox] = pick


def _connected_components(labels: np.ndarray) -> np.ndarray:
    """Split equal-label regions into 4-connected components (dense ids)."""
    h, w = labels.shape
    uf = UnionFind(h * w)
    flat = labels.ravel()
    idx = np.arange(h * w).reshape(h, w)
    right = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1)
    down = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1)
    for pairs in (right, down):
        same = flat[pairs[:, 0]] == flat[pairs[:, 1]]
        for a, b in pairs[same].tolist():
            uf.union(a, b)
    roots = uf.roots().reshape(h, w)
    dense, _ = relabel_first_seen(roots)
    return dense


def enforce_connectivity(label_map: LabelMap, min_size: int) -> LabelMap:
    """Split disconnected labels, then absorb components below min_size into
    the adjacent component sharing the most boundary (ties: lowest label)."""
    label_map.validate()
    comp = _connected_components(label_map.labels)
    while True:
        counts = np.bincount(comp.ravel())
        if len(counts) <= 1:
            break
        small = np.nonzero(counts < min_size)[0]
        if small.size == 0:
            break
        target = int(small[0])
        neighbor = _best_neighbor(comp, target)
        if neighbor < 0:
            break
        comp[comp == target] = neighbor
        comp, _ = relabel_first_seen(comp)
    dense, num = relabel_first_seen(comp)
    return LabelMap(labels=dense, num_labels=num).validate()


def _best_neighbor(comp: np.ndarray, target: int) -> int:
    """Adjacent component sharing the most boundary with `target`;
    ties broken by lowest component id. -1 when target has no neighbor."""
    mask = comp == target
    counts: dict[int, int] = {}
    for shift_mask, shift_comp in (
            (mask[:, :-1], comp[:, 1:]), (mask[:, 1:], comp[:, :-1]),
            (mask[:-1, :], comp[1:, :]), (mask[1:, :], comp[:-1, :])):
        neigh = shift_comp[shift_mask]
        neigh = neigh[neigh != target]
        for value, count in zip(*np.unique(neigh, return_counts=True)):
            counts[int(value)] = counts.get(int(value), 0) + int(count)
    if not counts:
        return -1
    best = max(counts.items(), key=lambda kv: (kv[1], -kv[0]))
    return best[0]
