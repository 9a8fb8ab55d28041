"""Batch export: images in, one FMAP per image out."""

import logging
import os

import numpy as np
import torch
from PIL import Image

from .formats import write_fmap
from .network import ExtractorConfig, build_network, preprocess

log = logging.getLogger("binseg_extractor.extract")


def load_rgb(path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def extract(image_paths: list, config: ExtractorConfig, out_dir) -> list[str]:
    """Run the converted network over each image and write FMAP files.

    The FMAP records the original image geometry as the source size, so the
    toolkit's nearest-neighbor upsampling maps codes back onto the original
    pixels regardless of any minimum-side rescale.
    """
    net = build_network(config)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for path in image_paths:
        rgb = load_rgb(path)
        batch = preprocess(torch.from_numpy(rgb.copy()), config.min_side)
        with torch.no_grad():
            fmap = net(batch)[0].numpy().astype(np.float32)
        out_path = os.path.join(
            out_dir, os.path.splitext(os.path.basename(path))[0] + ".fmap")
        write_fmap(fmap, rgb.shape[0], rgb.shape[1], out_path)
        log.info("%s: %dx%d image -> %dx%d grid (%d channels)", path,
                 rgb.shape[0], rgb.shape[1], fmap.shape[1], fmap.shape[2],
                 fmap.shape[0])
        written.append(out_path)
    return written
