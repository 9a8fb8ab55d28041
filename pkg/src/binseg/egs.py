"""Efficient graph-based segmentation: greedy ascending-weight merging on the
8-connected pixel graph with the adaptive threshold Int(C) + k/|C|.
"""

import math
from dataclasses import dataclass

import numpy as np

from .tensor_io import LabelMap, RasterImage, relabel_first_seen
from .unionfind import UnionFind


@dataclass(frozen=True)
class EgsParams:
    sigma: float = 1.0
    k: float = 100.0
    min_size: int = 20

    def validate(self) -> "EgsParams":
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.k <= 0:
            raise ValueError("k must be positive")
        if self.min_size < 1:
            raise ValueError("min_size must be positive")
        return self


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = math.ceil(4 * sigma)
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (xs / sigma) ** 2)
    return kernel / kernel.sum()


def smooth_channel(channel: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur, kernel radius ceil(4*sigma), clamped borders."""
    out = np.asarray(channel, dtype=np.float64)
    if sigma <= 0:
        return out.copy()
    kernel = _gaussian_kernel(sigma)
    radius = (len(kernel) - 1) // 2
    for axis in (1, 0):
        work = out if axis == 1 else out.T
        size = work.shape[1]
        idx = np.clip(np.arange(-radius, size + radius), 0, size - 1)
        padded = work[:, idx]
        acc = np.zeros_like(work)
        for tap in range(len(kernel)):
            acc += kernel[tap] * padded[:, tap:tap + size]
        out = acc if axis == 1 else acc.T
    return out


def _grid_edges(height: int, width: int, smoothed: np.ndarray):
    """8-connected edges (u, v, weight), each pair once, u < v in flat index."""
    idx = np.arange(height * width).reshape(height, width)
    flat = smoothed.reshape(height * width, 3)

    def family(src, dst):
        u = idx[src].ravel()
        v = idx[dst].ravel()
        w = np.sqrt(((flat[u] - flat[v]) ** 2).sum(axis=1))
        return u, v, w

    families = [
        family((slice(None), slice(None, -1)), (slice(None), slice(1, None))),
        family((slice(None, -1), slice(None)), (slice(1, None), slice(None))),
        family((slice(None, -1), slice(None, -1)), (slice(1, None), slice(1, None))),
        family((slice(None, -1), slice(1, None)), (slice(1, None), slice(None, -1))),
    ]
    u = np.concatenate([f[0] for f in families])
    v = np.concatenate([f[1] for f in families])
    w = np.concatenate([f[2] for f in families])
    return u, v, w


def egs_segment(image: RasterImage, params: EgsParams = EgsParams()) -> LabelMap:
    """Segment the image; processes edges in ascending weight order with a
    stable lexicographic tie-break on endpoint indices, then absorbs
    components smaller than min_size."""
    image.validate()
    params.validate()
    h, w = image.height, image.width
    smoothed = np.stack(
        [smooth_channel(image.pixels[:, :, c], params.sigma) for c in range(3)],
        axis=2)
    u, v, weights = _grid_edges(h, w, smoothed)
    order = np.lexsort((v, u, weights))
    u = u[order].tolist()
    v = v[order].tolist()
    weights = weights[order].tolist()

    uf = UnionFind(h * w)
    # max internal MST edge per component root; edges arrive ascending, so the
    # merge weight is always the new maximum
    internal = np.zeros(h * w, dtype=np.float64)
    k = params.k
    size = uf.size
    for a, b, weight in zip(u, v, weights):
        ra, rb = uf.find(a), uf.find(b)
        if ra == rb:
            continue
        if weight <= min(internal[ra] + k / size[ra],
                         internal[rb] + k / size[rb]):
            internal[uf.union(ra, rb)] = weight

    min_size = params.min_size
    for a, b, weight in zip(u, v, weights):
        ra, rb = uf.find(a), uf.find(b)
        if ra != rb and (size[ra] < min_size or size[rb] < min_size):
            uf.union(ra, rb)

    roots = uf.roots().reshape(h, w)
    dense, num = relabel_first_seen(roots)
    return LabelMap(labels=dense, num_labels=num).validate()
