"""binseg: binary-code image segmentation toolkit.

Learns ITQ hashing weights over high-dimensional feature maps, encodes every
spatial location to a short binary code, and merges low-level superpixels
whose codes agree, with EGS / raw-SLIC / k-means baselines and a
Segmentation-IoU benchmark harness.
"""

from .egs import EgsParams, egs_segment
from .evaluation import (IoUReport, ManifestEntry, SweepConfig, SweepResult,
                         SweepRow, dataset_iou, iou, match_segments,
                         read_manifest, sweep_superpixels)
from .itq import (BinaryCodeMap, DegenerateInputError, HashModel,
                  ItqTrainReport, RankDeficiencyError, encode_feature_map,
                  encode_vector, fit_pca, load_corpus, load_model,
                  read_binary_code_map, save_model, train_hash_model,
                  train_itq, write_binary_code_map)
from .pipeline import (kmeans_baseline, segment_with_codes,
                       write_sidecar)
from .segmenter import (RegionAdjacencyGraph, SegmentationResult,
                        assign_superpixel_codes, build_rag, kmeans_merge,
                        merge_equal_codes, superpixel_mean_features,
                        upsample_codes, upsample_features)
from .slic import SlicParams, enforce_connectivity, rgb_to_lab, slic
from .tensor_io import (VOID_LABEL, FeatureMap, FormatError, LabelMap,
                        RasterImage, read_feature_map, read_feature_matrix,
                        read_image, read_label_map, write_feature_map,
                        write_feature_matrix, write_image, write_label_map)

__version__ = "0.1.0"

__all__ = [
    "BinaryCodeMap", "DegenerateInputError", "EgsParams", "FeatureMap",
    "FormatError", "HashModel", "IoUReport", "ItqTrainReport", "LabelMap",
    "ManifestEntry", "RankDeficiencyError", "RasterImage",
    "RegionAdjacencyGraph", "SegmentationResult", "SlicParams", "SweepConfig",
    "SweepResult", "SweepRow", "VOID_LABEL", "assign_superpixel_codes",
    "build_rag", "dataset_iou", "egs_segment", "encode_feature_map",
    "encode_vector", "enforce_connectivity", "fit_pca", "iou",
    "kmeans_baseline", "kmeans_merge", "load_corpus", "load_model",
    "match_segments",
    "merge_equal_codes", "read_binary_code_map", "read_feature_map",
    "read_feature_matrix", "read_image", "read_label_map", "read_manifest",
    "rgb_to_lab", "save_model", "segment_with_codes", "slic",
    "superpixel_mean_features", "sweep_superpixels", "train_hash_model",
    "train_itq", "upsample_codes", "upsample_features", "write_feature_map",
    "write_feature_matrix", "write_image", "write_label_map",
    "write_sidecar",
]
