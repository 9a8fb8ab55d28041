"""Uniform sampling of per-location feature vectors into an FVEC corpus."""

import numpy as np

from .formats import read_fmap, write_fvec


def sample_corpus(fmap_paths: list, n: int, seed: int, out_path) -> np.ndarray:
    """Draw n vectors uniformly (without replacement) across every spatial
    location of every input FMAP and write them as an FVEC matrix."""
    if n < 1:
        raise ValueError("sample count must be positive")
    if not fmap_paths:
        raise ValueError("no feature maps given")
    maps = []
    sizes = []
    dim = None
    for path in fmap_paths:
        data, _, _ = read_fmap(path)
        if dim is None:
            dim = data.shape[0]
        elif data.shape[0] != dim:
            raise ValueError(f"{path}: channel count {data.shape[0]} differs "
                             f"from {dim}")
        maps.append(data.reshape(dim, -1).T)
        sizes.append(maps[-1].shape[0])
    total = int(np.sum(sizes))
    if n > total:
        raise ValueError(f"requested {n} vectors but only {total} available")
    rng = np.random.default_rng(seed)
    picks = np.sort(rng.choice(total, size=n, replace=False))
    stacked = np.concatenate(maps, axis=0)
    corpus = stacked[picks].astype(np.float32)
    write_fvec(corpus, out_path)
    return corpus
