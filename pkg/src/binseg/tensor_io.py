"""Bit-exact file containers for feature maps, images, and label maps.

Formats:
  FMAP  spatial feature tensor, float32 little-endian, channel-major
  FVEC  flat N x D feature corpus, float32 little-endian
  PPM   binary P6, maxval 255, for RGB images
  PGM   binary P5, maxval 65535 (big-endian 16-bit samples), for label maps

None of the readers ever raise anything but FormatError / OSError on bad
input; arbitrary byte garbage must produce a structured error.
"""

import struct
from dataclasses import dataclass

import numpy as np

FMAP_MAGIC = b"FMAP"
FVEC_MAGIC = b"FVEC"

# Reserved label for ground-truth pixels excluded from evaluation.
VOID_LABEL = 65535

_FMAP_HEADER = struct.Struct("<4sBBBB3I2I")
_FVEC_HEADER = struct.Struct("<4s3I")


class FormatError(Exception):
    """Malformed container file; carries the byte offset of the defect."""

    def __init__(self, message: str, *, offset: int, kind: str):
        super().__init__(f"{message} (kind={kind}, offset={offset})")
        self.offset = offset
        self.kind = kind


@dataclass(frozen=True)
class FeatureMap:
    """C x H' x W' float activations plus the source image geometry.

    data is (channels, height, width) float32 in C order, so the flat
    layout is channel-major: index = c*H'*W' + y*W' + x.
    """

    data: np.ndarray
    source_height: int
    source_width: int

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def vector_at(self, y: int, x: int) -> np.ndarray:
        """Per-location feature vector (a strided slice, no copy)."""
        return self.data[:, y, x]

    def validate(self) -> "FeatureMap":
        if self.data.ndim != 3:
            raise ValueError("feature map data must be 3-d (C, H, W)")
        if self.data.dtype != np.float32:
            raise ValueError("feature map data must be float32")
        c, h, w = self.data.shape
        if min(c, h, w) < 1:
            raise ValueError("feature map dims must be positive")
        if self.source_height < h or self.source_width < w:
            raise ValueError("source geometry smaller than feature grid")
        if not np.isfinite(self.data).all():
            raise ValueError("feature map contains non-finite values")
        return self


@dataclass(frozen=True)
class RasterImage:
    """8-bit RGB image, pixels shaped (height, width, 3)."""

    pixels: np.ndarray

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def validate(self) -> "RasterImage":
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError("image pixels must be (H, W, 3)")
        if self.pixels.dtype != np.uint8:
            raise ValueError("image pixels must be uint8")
        if self.height < 1 or self.width < 1:
            raise ValueError("image dims must be positive")
        return self


@dataclass(frozen=True)
class LabelMap:
    """Dense per-pixel region assignment.

    Labels are dense in [0, num_labels) and every id occurs at least once.
    Ground-truth maps may additionally carry VOID_LABEL pixels, which are
    not counted in num_labels.
    """

    labels: np.ndarray
    num_labels: int

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def validate(self) -> "LabelMap":
        if self.labels.ndim != 2:
            raise ValueError("label map must be 2-d")
        if not np.issubdtype(self.labels.dtype, np.integer):
            raise ValueError("labels must be integers")
        if self.height < 1 or self.width < 1:
            raise ValueError("label map dims must be positive")
        if self.num_labels < 1:
            raise ValueError("num_labels must be positive")
        flat = self.labels.ravel()
        void = flat == VOID_LABEL
        real = flat[~void]
        if void.any() and self.num_labels > VOID_LABEL:
            raise ValueError("void sentinel collides with a real label id")
        if real.size == 0:
            raise ValueError("label map has no non-void pixels")
        if real.min() < 0 or real.max() >= self.num_labels:
            raise ValueError("labels out of range [0, num_labels)")
        if np.bincount(real, minlength=self.num_labels).min() == 0:
            raise ValueError("labels not dense: some id never occurs")
        return self


def _need(buf: bytes, offset: int, n: int, what: str) -> None:
    if len(buf) < offset + n:
        raise FormatError(f"truncated file while reading {what}",
                          offset=len(buf), kind="truncated")


# ---------------------------------------------------------------------------
# FMAP


def write_feature_map(fmap: FeatureMap, path) -> None:
    """Write the FMAP container; byte-deterministic for equal inputs."""
    fmap.validate()
    c, h, w = fmap.data.shape
    header = _FMAP_HEADER.pack(FMAP_MAGIC, 1, 0, 3, 0, c, h, w,
                               fmap.source_height, fmap.source_width)
    payload = np.ascontiguousarray(fmap.data, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_feature_map(path) -> FeatureMap:
    with open(path, "rb") as fh:
        buf = fh.read()
    _need(buf, 0, 4, "magic")
    if buf[:4] != FMAP_MAGIC:
        raise FormatError("bad magic, expected FMAP", offset=0, kind="bad-magic")
    _need(buf, 4, 4, "format bytes")
    if buf[4] != 1:
        raise FormatError(f"unsupported version {buf[4]}", offset=4, kind="bad-version")
    if buf[5] != 0:
        raise FormatError(f"unsupported dtype {buf[5]}", offset=5, kind="bad-dtype")
    if buf[6] != 3:
        raise FormatError(f"unsupported ndim {buf[6]}", offset=6, kind="bad-ndim")
    if buf[7] != 0:
        raise FormatError("reserved byte must be zero", offset=7, kind="bad-reserved")
    _need(buf, 8, 20, "dimensions")
    c, h, w = struct.unpack_from("<3I", buf, 8)
    src_h, src_w = struct.unpack_from("<2I", buf, 20)
    for i, dim in enumerate((c, h, w)):
        if dim < 1:
            raise FormatError("zero dimension", offset=8 + 4 * i, kind="bad-dims")
    if src_h < h:
        raise FormatError("source_height smaller than grid", offset=20, kind="bad-dims")
    if src_w < w:
        raise FormatError("source_width smaller than grid", offset=24, kind="bad-dims")
    expected = c * h * w * 4
    body = len(buf) - 28
    if body < expected:
        raise FormatError(f"payload holds {body} bytes, header implies {expected}",
                          offset=28, kind="size-mismatch")
    if body > expected:
        raise FormatError("trailing bytes after payload",
                          offset=28 + expected, kind="trailing-data")
    data = np.frombuffer(buf, dtype="<f4", count=c * h * w, offset=28)
    finite = np.isfinite(data)
    if not finite.all():
        first = int(np.argmin(finite))
        raise FormatError("non-finite value in payload",
                          offset=28 + 4 * first, kind="non-finite")
    data = data.reshape(c, h, w).astype(np.float32, copy=True)
    return FeatureMap(data=data, source_height=src_h, source_width=src_w)


# ---------------------------------------------------------------------------
# FVEC


def write_feature_matrix(samples: np.ndarray, path) -> None:
    """Write an N x D float32 corpus in the FVEC container."""
    samples = np.asarray(samples)
    if samples.ndim != 2 or min(samples.shape) < 1:
        raise ValueError("corpus must be a non-empty 2-d matrix")
    if not np.isfinite(samples).all():
        raise ValueError("corpus contains non-finite values")
    n, d = samples.shape
    with open(path, "wb") as fh:
        fh.write(_FVEC_HEADER.pack(FVEC_MAGIC, n, d, 0))
        fh.write(np.ascontiguousarray(samples, dtype="<f4").tobytes())


def read_feature_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        buf = fh.read()
    _need(buf, 0, 4, "magic")
    if buf[:4] != FVEC_MAGIC:
        raise FormatError("bad magic, expected FVEC", offset=0, kind="bad-magic")
    _need(buf, 4, 12, "header")
    n, d, reserved = struct.unpack_from("<3I", buf, 4)
    if reserved != 0:
        raise FormatError("reserved word must be zero", offset=12, kind="bad-reserved")
    if n < 1 or d < 1:
        raise FormatError("zero dimension", offset=4, kind="bad-dims")
    expected = n * d * 4
    body = len(buf) - 16
    if body < expected:
        raise FormatError(f"payload holds {body} bytes, header implies {expected}",
                          offset=16, kind="size-mismatch")
    if body > expected:
        raise FormatError("trailing bytes after payload",
                          offset=16 + expected, kind="trailing-data")
    data = np.frombuffer(buf, dtype="<f4", count=n * d, offset=16)
    finite = np.isfinite(data)
    if not finite.all():
        first = int(np.argmin(finite))
        raise FormatError("non-finite value in payload",
                          offset=16 + 4 * first, kind="non-finite")
    return data.reshape(n, d).astype(np.float32, copy=True)


# ---------------------------------------------------------------------------
# Netpbm


def _parse_pnm_header(buf: bytes, magic: bytes, path) -> tuple[int, ...]:
    """Parse 'magic w h maxval' allowing whitespace and # comments.

    Returns (width, height, maxval, data_offset).
    """
    _need(buf, 0, 2, "magic")
    if buf[:2] != magic:
        raise FormatError(f"bad magic, expected {magic.decode()}",
                          offset=0, kind="bad-magic")
    pos = 2
    fields = []
    while len(fields) < 3:
        # skip whitespace and comment lines
        while True:
            _need(buf, pos, 1, "header")
            ch = buf[pos:pos + 1]
            if ch.isspace():
                pos += 1
            elif ch == b"#":
                while pos < len(buf) and buf[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                break
        start = pos
        while pos < len(buf) and buf[pos:pos + 1].isdigit():
            pos += 1
        if pos == start:
            raise FormatError("expected decimal header field",
                              offset=start, kind="bad-header")
        fields.append(int(buf[start:pos]))
    _need(buf, pos, 1, "header")
    if not buf[pos:pos + 1].isspace():
        raise FormatError("missing whitespace after maxval",
                          offset=pos, kind="bad-header")
    pos += 1
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise FormatError("zero image dimension", offset=2, kind="bad-dims")
    return width, height, maxval, pos


def write_image(image: RasterImage, path) -> None:
    image.validate()
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (image.width, image.height))
        fh.write(np.ascontiguousarray(image.pixels).tobytes())


def read_image(path) -> RasterImage:
    with open(path, "rb") as fh:
        buf = fh.read()
    width, height, maxval, pos = _parse_pnm_header(buf, b"P6", path)
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}", offset=2, kind="bad-header")
    expected = width * height * 3
    body = len(buf) - pos
    if body < expected:
        raise FormatError(f"pixel data holds {body} bytes, header implies {expected}",
                          offset=pos, kind="size-mismatch")
    if body > expected:
        raise FormatError("trailing bytes after pixel data",
                          offset=pos + expected, kind="trailing-data")
    pixels = np.frombuffer(buf, dtype=np.uint8, count=expected, offset=pos)
    return RasterImage(pixels=pixels.reshape(height, width, 3).copy())


def write_label_map(label_map: LabelMap, path) -> None:
    """Write labels as 16-bit big-endian PGM; caps at 65536 distinct labels."""
    label_map.validate()
    if label_map.num_labels > 65536:
        raise ValueError("more than 65536 labels cannot be stored in 16-bit PGM")
    has_void = bool((label_map.labels == VOID_LABEL).any())
    if has_void and label_map.num_labels > VOID_LABEL:
        raise ValueError("void label collides with a real label id on write")
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n65535\n" % (label_map.width, label_map.height))
        fh.write(np.ascontiguousarray(label_map.labels, dtype=">u2").tobytes())


def read_label_map(path) -> LabelMap:
    """Read a 16-bit PGM and relabel to dense ids, ascending by raw value.

    Raw value 65535 is the void sentinel and survives unchanged.
    """
    with open(path, "rb") as fh:
        buf = fh.read()
    width, height, maxval, pos = _parse_pnm_header(buf, b"P5", path)
    if maxval != 65535:
        raise FormatError(f"label maps require maxval 65535, got {maxval}",
                          offset=2, kind="bad-header")
    expected = width * height * 2
    body = len(buf) - pos
    if body < expected:
        raise FormatError(f"sample data holds {body} bytes, header implies {expected}",
                          offset=pos, kind="size-mismatch")
    if body > expected:
        raise FormatError("trailing bytes after sample data",
                          offset=pos + expected, kind="trailing-data")
    raw = np.frombuffer(buf, dtype=">u2", count=width * height, offset=pos)
    raw = raw.astype(np.int64).reshape(height, width)
    void = raw == VOID_LABEL
    values = np.unique(raw[~void])
    if values.size == 0:
        raise FormatError("label map has no non-void pixels",
                          offset=pos, kind="empty-label-map")
    lookup = np.full(int(values.max()) + 1, -1, dtype=np.int32)
    lookup[values] = np.arange(values.size, dtype=np.int32)
    labels = np.where(void, np.int32(VOID_LABEL), lookup[np.where(void, 0, raw)])
    return LabelMap(labels=labels.astype(np.int32), num_labels=int(values.size))


def relabel_first_seen(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Densify arbitrary non-negative ids in row-major first-occurrence order."""
    flat = labels.ravel()
    _, first_pos, inverse = np.unique(flat, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first_pos, kind="stable"), kind="stable")
    dense = order[inverse].astype(np.int32).reshape(labels.shape)
    return dense, int(order.size)
