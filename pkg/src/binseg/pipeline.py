"""End-to-end flows shared by the CLI, the HTTP service, and the benchmark
harness: image + feature map + hash model in, merged segmentation out.
"""

from .itq import HashModel, encode_feature_map
from .segmenter import (SegmentationResult, assign_superpixel_codes,
                        build_rag, kmeans_merge, merge_equal_codes,
                        superpixel_mean_features, upsample_codes,
                        upsample_features)
from .slic import SlicParams, slic
from .tensor_io import FeatureMap, LabelMap, RasterImage


def write_sidecar(result: SegmentationResult, code_len: int, path) -> None:
    """Text companion to a segmentation PGM: one line per final segment with
    its code in hex and its member superpixel ids."""
    digits = max(1, (code_len + 3) // 4)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# segment\tcode_hex\tsuperpixels\n")
        for final_id in range(result.labels.num_labels):
            members = sorted(result.merged_from[final_id])
            code = int(result.superpixel_codes[members[0]])
            fh.write(f"{final_id}\t0x{code:0{digits}x}\t"
                     f"{','.join(str(m) for m in members)}\n")


def _check_geometry(image: RasterImage, fmap: FeatureMap) -> None:
    if (fmap.source_height, fmap.source_width) != (image.height, image.width):
        raise ValueError(
            f"feature map was extracted from a {fmap.source_height}x"
            f"{fmap.source_width} image, got {image.height}x{image.width}")


def segment_with_codes(image: RasterImage, fmap: FeatureMap, model: HashModel,
                       slic_params: SlicParams, seed: int = 0,
                       merge_mode: str = "adjacency"
                       ) -> tuple[SegmentationResult, LabelMap]:
    """Full proposed flow: superpixels, per-location codes, majority vote,
    equal-code merge. Returns the result and the underlying superpixels."""
    _check_geometry(image, fmap)
    superpixels = slic(image, slic_params, seed)
    binmap = encode_feature_map(model, fmap)
    pixel_codes = upsample_codes(binmap, image.height, image.width)
    sp_codes = assign_superpixel_codes(superpixels, pixel_codes, model.code_len)
    rag = build_rag(superpixels)
    result = merge_equal_codes(superpixels, sp_codes, rag, mode=merge_mode)
    return result, superpixels


def kmeans_baseline(image: RasterImage, fmap: FeatureMap, k: int,
                    slic_params: SlicParams, seed: int = 0,
                    merge_mode: str = "adjacency"
                    ) -> tuple[SegmentationResult, LabelMap]:
    """Clustering baseline: k-means over superpixel-mean features, merged
    with the same adjacency semantics as the proposed method."""
    _check_geometry(image, fmap)
    superpixels = slic(image, slic_params, seed)
    feats = upsample_features(fmap, image.height, image.width)
    sp_feats = superpixel_mean_features(superpixels, feats)
    rag = build_rag(superpixels)
    result = kmeans_merge(superpixels, sp_feats, k, seed, rag, mode=merge_mode)
    return result, superpixels
