"""Feature-map exporter for the binseg toolkit: AlexNet with fc layers
converted to convolutions, plus corpus sampling and MSRC/BSDS ground-truth
conversion. Output formats (FMAP/FVEC/PGM) match the toolkit byte-for-byte.
"""

from .corpus import sample_corpus
from .extract import extract, load_rgb
from .gt import bsds_mat_to_labels, convert_gt, msrc_image_to_labels
from .network import (TAPS, ExtractorConfig, FullyConvAlexNet,
                      MissingWeightsError, build_network, preprocess)

__version__ = "0.1.0"

__all__ = [
    "TAPS", "ExtractorConfig", "FullyConvAlexNet", "MissingWeightsError",
    "bsds_mat_to_labels", "build_network", "convert_gt", "extract",
    "load_rgb", "msrc_image_to_labels", "preprocess", "sample_corpus",
]
