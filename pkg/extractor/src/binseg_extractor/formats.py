"""Writers (and the reader needed for corpus sampling) for the segmentation
toolkit's container formats. These mirror the published byte layouts exactly;
the files are the only coupling between this exporter and the toolkit.

FMAP: "FMAP", version 1, dtype 0 (float32 LE), ndim 3, reserved 0, then
u32-LE dims (C, H', W'), u32-LE source height/width, then the payload.
FVEC: "FVEC", u32 N, u32 D, u32 reserved, float32-LE payload.
Label maps: binary PGM P5, maxval 65535, big-endian 16-bit samples.
"""

import struct

import numpy as np

VOID_LABEL = 65535


def write_fmap(data: np.ndarray, source_height: int, source_width: int,
               path) -> None:
    data = np.asarray(data, dtype=np.float32)
    if data.ndim != 3:
        raise ValueError("feature data must be (C, H', W')")
    if not np.isfinite(data).all():
        raise ValueError("feature data contains non-finite values")
    c, h, w = data.shape
    if source_height < h or source_width < w:
        raise ValueError("source geometry smaller than the feature grid")
    with open(path, "wb") as fh:
        fh.write(b"FMAP" + bytes([1, 0, 3, 0]))
        fh.write(struct.pack("<3I", c, h, w))
        fh.write(struct.pack("<2I", source_height, source_width))
        fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def read_fmap(path) -> tuple[np.ndarray, int, int]:
    """Returns (data, source_height, source_width); strict layout checks."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != b"FMAP" or buf[4:8] != bytes([1, 0, 3, 0]):
        raise ValueError(f"{path}: not an FMAP v1 float32 file")
    c, h, w = struct.unpack_from("<3I", buf, 8)
    src_h, src_w = struct.unpack_from("<2I", buf, 20)
    expected = 28 + c * h * w * 4
    if len(buf) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, got {len(buf)}")
    data = np.frombuffer(buf, dtype="<f4", count=c * h * w, offset=28)
    return data.reshape(c, h, w).copy(), src_h, src_w


def write_fvec(matrix: np.ndarray, path) -> None:
    matrix = np.asarray(matrix, dtype=np.float32)
    if matrix.ndim != 2 or min(matrix.shape) < 1:
        raise ValueError("corpus must be a non-empty N x D matrix")
    n, d = matrix.shape
    with open(path, "wb") as fh:
        fh.write(b"FVEC" + struct.pack("<3I", n, d, 0))
        fh.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())


def write_label_pgm(labels: np.ndarray, path) -> None:
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError("label map must be 2-d")
    if labels.min() < 0 or labels.max() > 65535:
        raise ValueError("labels out of the 16-bit range")
    height, width = labels.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n65535\n" % (width, height))
        fh.write(np.ascontiguousarray(labels, dtype=">u2").tobytes())
