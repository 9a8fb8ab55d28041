"""Seeded synthetic fixtures shared by the unit and acceptance suites:
colored-shape images with exact ground truth, and pseudo feature maps built
from smoothed color channels (16 channels, subsampled grid).
"""

import numpy as np

from binseg import FeatureMap, LabelMap, RasterImage
from binseg.egs import smooth_channel
from binseg.tensor_io import relabel_first_seen

PALETTE = np.array([
    [200, 60, 60], [60, 180, 70], [70, 90, 210], [220, 200, 60],
    [170, 60, 200], [60, 200, 200], [230, 140, 50], [120, 220, 120],
], dtype=np.uint8)


def make_shapes_image(seed: int, height: int = 72, width: int = 96
                      ) -> tuple[RasterImage, LabelMap]:
    """Background plus 1-3 contrasting rectangles/circles; ground truth has
    one label per shape plus the background."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(PALETTE))
    pixels = np.empty((height, width, 3), np.uint8)
    pixels[:] = PALETTE[order[0]]
    gt = np.zeros((height, width), np.int32)
    num_shapes = int(rng.integers(1, 4))
    for s in range(num_shapes):
        color = PALETTE[order[s + 1]]
        if rng.integers(2) == 0:
            h = int(rng.integers(height // 5, height // 2))
            w = int(rng.integers(width // 5, width // 2))
            y = int(rng.integers(0, height - h))
            x = int(rng.integers(0, width - w))
            mask = np.zeros((height, width), bool)
            mask[y:y + h, x:x + w] = True
        else:
            r = int(rng.integers(min(height, width) // 7, min(height, width) // 3))
            cy = int(rng.integers(r, height - r))
            cx = int(rng.integers(r, width - r))
            yy, xx = np.mgrid[:height, :width]
            mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
        pixels[mask] = color
        gt[mask] = s + 1
    dense, num = relabel_first_seen(gt)
    image = RasterImage(pixels=pixels).validate()
    return image, LabelMap(labels=dense, num_labels=num).validate()


def make_noise_image(seed: int, height: int = 64, width: int = 64) -> RasterImage:
    rng = np.random.default_rng(seed)
    return RasterImage(
        pixels=rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8))


def pseudo_feature_map(image: RasterImage, stride: int = 2) -> FeatureMap:
    """16-channel pseudo features: raw and Gaussian-smoothed color channels
    plus grayscale variants, sampled on a strided grid."""
    rgb = image.pixels.astype(np.float64) / 255.0
    channels = [rgb[:, :, c] for c in range(3)]
    for sigma in (1.0, 2.0, 4.0):
        for c in range(3):
            channels.append(smooth_channel(rgb[:, :, c], sigma))
    gray = rgb.mean(axis=2)
    channels += [gray, smooth_channel(gray, 1.0), smooth_channel(gray, 4.0),
                 rgb.max(axis=2)]
    stack = np.stack(channels, axis=0)[:, ::stride, ::stride]
    return FeatureMap(data=stack.astype(np.float32),
                      source_height=image.height,
                      source_width=image.width).validate()


def make_dataset(count: int = 20, seed0: int = 1000):
    """The acceptance dataset: (images, ground truths, feature maps)."""
    images, gts, fmaps = [], [], []
    for i in range(count):
        image, gt = make_shapes_image(seed0 + i)
        images.append(image)
        gts.append(gt)
        fmaps.append(pseudo_feature_map(image))
    return images, gts, fmaps
