"""Ground-truth conversion to label-map PGMs.

MSRC ships color-coded bitmaps: distinct colors become dense labels (ordered
by packed RGB value) and black pixels become the void sentinel 65535. BSDS500
ships MATLAB files with several human annotations per image: each annotation
becomes its own PGM.
"""

import glob
import logging
import os

import numpy as np
from PIL import Image
from scipy.io import loadmat

from .formats import VOID_LABEL, write_label_pgm

log = logging.getLogger("binseg_extractor.gt")

_MSRC_PATTERNS = ("*.bmp", "*.png")
_VOID_COLOR = 0  # packed black


def msrc_image_to_labels(rgb: np.ndarray) -> np.ndarray:
    """Discover the color coding of one annotation image."""
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("annotation must be an RGB image")
    packed = (rgb[:, :, 0].astype(np.int64) << 16) \
        | (rgb[:, :, 1].astype(np.int64) << 8) | rgb[:, :, 2]
    colors = np.unique(packed)
    real = colors[colors != _VOID_COLOR]
    if real.size == 0:
        raise ValueError("annotation contains only void pixels")
    if real.size > VOID_LABEL:
        raise ValueError("annotation has more colors than storable labels")
    lookup = {int(color): index for index, color in enumerate(real)}
    lookup[_VOID_COLOR] = VOID_LABEL
    out = np.empty(packed.shape, np.int64)
    for color, label in lookup.items():
        out[packed == color] = label
    return out


def bsds_mat_to_labels(path) -> list[np.ndarray]:
    """One dense 0-based label array per human annotation in the .mat file."""
    mat = loadmat(path)
    if "groundTruth" not in mat:
        raise ValueError(f"{path}: no groundTruth variable")
    annotations = mat["groundTruth"].ravel()
    outputs = []
    for record in annotations:
        seg = np.asarray(record["Segmentation"][0, 0])
        values = np.unique(seg)
        lookup = np.zeros(int(values.max()) + 1, np.int64)
        lookup[values] = np.arange(values.size)
        outputs.append(lookup[seg])
    if not outputs:
        raise ValueError(f"{path}: empty annotation list")
    return outputs


def convert_gt(dataset: str, in_dir, out_dir) -> list[str]:
    """Convert every annotation file under in_dir; returns written paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if dataset == "msrc":
        files = sorted(p for pattern in _MSRC_PATTERNS
                       for p in glob.glob(os.path.join(in_dir, pattern)))
        if not files:
            raise ValueError(f"no MSRC annotation images under {in_dir}")
        for path in files:
            with Image.open(path) as img:
                rgb = np.asarray(img.convert("RGB"))
            labels = msrc_image_to_labels(rgb)
            out_path = os.path.join(
                out_dir, os.path.splitext(os.path.basename(path))[0] + ".pgm")
            write_label_pgm(labels, out_path)
            written.append(out_path)
    elif dataset == "bsds":
        files = sorted(glob.glob(os.path.join(in_dir, "*.mat")))
        if not files:
            raise ValueError(f"no BSDS .mat annotations under {in_dir}")
        for path in files:
            stem = os.path.splitext(os.path.basename(path))[0]
            for index, labels in enumerate(bsds_mat_to_labels(path)):
                out_path = os.path.join(out_dir, f"{stem}.{index}.pgm")
                write_label_pgm(labels, out_path)
                written.append(out_path)
    else:
        raise ValueError(f"unknown dataset {dataset!r} (use msrc or bsds)")
    log.info("converted %d annotation file(s) from %s", len(written), in_dir)
    return written
