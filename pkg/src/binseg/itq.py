"""Iterative-quantization hashing: PCA projection, learned rotation, and the
binary encoding layer (affine map + sigmoid + 0.5 threshold) applied to
vectors and spatial feature maps.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .tensor_io import (FMAP_MAGIC, FVEC_MAGIC, FeatureMap, FormatError,
                        _need, read_feature_map, read_feature_matrix)

MODEL_MAGIC = b"ITQ1"
BMAP_MAGIC = b"BMAP"

MAX_CODE_LEN = 64  # codes are stored in a 64-bit word

_ORTHO_TOL = 1e-6


class RankDeficiencyError(ValueError):
    """Training data has fewer informative directions than requested bits."""


class DegenerateInputError(ValueError):
    """Input carries no signal (e.g. all-zero projected data)."""


@dataclass(frozen=True)
class HashModel:
    """Learned hashing weights: mean, PCA projection, and ITQ rotation.

    All arrays are float32 so that the on-disk container round-trips
    losslessly. The effective encoding weight matrix is projection @ rotation.
    """

    mean: np.ndarray        # (D,)
    projection: np.ndarray  # (D, c), orthonormal columns
    rotation: np.ndarray    # (c, c), orthogonal

    @property
    def input_dim(self) -> int:
        return self.projection.shape[0]

    @property
    def code_len(self) -> int:
        return self.projection.shape[1]

    @classmethod
    def from_arrays(cls, mean, projection, rotation) -> "HashModel":
        model = cls(mean=np.asarray(mean, dtype=np.float32),
                    projection=np.asarray(projection, dtype=np.float32),
                    rotation=np.asarray(rotation, dtype=np.float32))
        return model.validate()

    def validate(self) -> "HashModel":
        if self.projection.ndim != 2:
            raise ValueError("projection must be a D x c matrix")
        d, c = self.projection.shape
        if not 1 <= c <= min(d, MAX_CODE_LEN):
            raise ValueError(f"code_len must be in [1, min(D, {MAX_CODE_LEN})]")
        if self.mean.shape != (d,):
            raise ValueError("mean length must match input_dim")
        if self.rotation.shape != (c, c):
            raise ValueError("rotation must be c x c")
        for arr, name in ((self.mean, "mean"), (self.projection, "projection"),
                          (self.rotation, "rotation")):
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite values")
        p = self.projection.astype(np.float64)
        r = self.rotation.astype(np.float64)
        if np.abs(p.T @ p - np.eye(c)).max() > _ORTHO_TOL:
            raise ValueError("projection columns are not orthonormal")
        if np.abs(r.T @ r - np.eye(c)).max() > _ORTHO_TOL:
            raise ValueError("rotation is not orthogonal")
        return self

    def weights(self) -> np.ndarray:
        """Effective encoding weights projection @ rotation, float64."""
        return self.projection.astype(np.float64) @ self.rotation.astype(np.float64)


@dataclass(frozen=True)
class BinaryCodeMap:
    """Per-location codes on the feature grid, aligned to a source image."""

    codes: np.ndarray  # (H', W') uint64
    code_len: int
    source_height: int
    source_width: int

    @property
    def height(self) -> int:
        return self.codes.shape[0]

    @property
    def width(self) -> int:
        return self.codes.shape[1]

    def validate(self) -> "BinaryCodeMap":
        if self.codes.ndim != 2 or self.codes.dtype != np.uint64:
            raise ValueError("codes must be a 2-d uint64 array")
        if not 1 <= self.code_len <= MAX_CODE_LEN:
            raise ValueError("code_len out of range")
        if self.height < 1 or self.width < 1:
            raise ValueError("code map dims must be positive")
        if self.source_height < self.height or self.source_width < self.width:
            raise ValueError("source geometry smaller than code grid")
        if self.code_len < MAX_CODE_LEN:
            if int(self.codes.max()) >= 1 << self.code_len:
                raise ValueError("code exceeds code_len bits")
        return self


@dataclass
class ItqTrainReport:
    """Quantization loss trace of the alternating minimization."""

    iterations: int
    loss_per_iter: list[float]
    rotations: list[np.ndarray] | None = field(default=None, repr=False)


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t, dtype=np.float64)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    ez = np.exp(t[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def fit_pca(samples: np.ndarray, code_len: int,
            method: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    """Mean and top-`code_len` principal directions of the sample matrix.

    Columns are ordered by descending eigenvalue and sign-fixed so each
    column's largest-magnitude entry is non-negative. `method` selects the
    eigendecomposition route: "covariance" (D x D), "gram" (N x N), or
    "auto" which picks covariance only when N > D.

    Raises RankDeficiencyError when the centered data spans fewer than
    `code_len` directions.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("samples must be an N x D matrix")
    n, d = x.shape
    if code_len < 1:
        raise ValueError("code_len must be positive")
    if code_len > d:
        raise ValueError("code_len exceeds the feature dimension")
    if n < code_len:
        raise ValueError(f"need at least code_len={code_len} samples, got {n}")
    if not np.isfinite(x).all():
        raise ValueError("samples contain non-finite values")
    if method not in ("auto", "covariance", "gram"):
        raise ValueError(f"unknown PCA method {method!r}")
    if method == "auto":
        method = "covariance" if n > d else "gram"

    mean = x.mean(axis=0)
    xc = x - mean
    if method == "covariance":
        cov = (xc.T @ xc) / max(n - 1, 1)
        eigvals, eigvecs = np.linalg.eigh(cov)
        order = np.argsort(eigvals)[::-1]
        eigvals = eigvals[order]
        basis = eigvecs[:, order]
    else:
        gram = (xc @ xc.T) / max(n - 1, 1)
        eigvals, eigvecs = np.linalg.eigh(gram)
        order = np.argsort(eigvals)[::-1]
        eigvals = eigvals[order]
        u = eigvecs[:, order]
        basis = np.zeros((d, min(n, d)))
        for i in range(basis.shape[1]):
            scale = eigvals[i] * max(n - 1, 1)
            if scale > 0:
                basis[:, i] = (xc.T @ u[:, i]) / np.sqrt(scale)
        eigvals = eigvals[: basis.shape[1]]

    top = np.maximum(eigvals, 0.0)
    tol = max(n, d) * np.finfo(np.float64).eps * (top[0] if top.size else 0.0)
    if code_len > top.size or top[code_len - 1] <= tol:
        raise RankDeficiencyError(
            f"centered samples have rank < {code_len} (tolerance {tol:.3e})")

    projection = basis[:, :code_len].copy()
    # sign convention: largest-magnitude entry of each column non-negative
    for j in range(code_len):
        col = projection[:, j]
        if col[int(np.argmax(np.abs(col)))] < 0:
            projection[:, j] = -col
    return mean, projection


def train_itq(projected: np.ndarray, iterations: int, seed: int,
              init_rotation: np.ndarray | None = None,
              track_rotations: bool = False) -> tuple[np.ndarray, ItqTrainReport]:
    """Learn the orthogonal rotation minimizing ||B - V R||_F^2.

    Alternates the closed-form updates: B = sign(V R) with sign(0) := +1,
    then the Procrustes solution R from the SVD of B^T V. Initial R is the
    QR orthogonalization of a seeded Gaussian matrix with sign-fixed
    diagonal, unless `init_rotation` is supplied.
    """
    v = np.asarray(projected, dtype=np.float64)
    if v.ndim != 2:
        raise ValueError("projected data must be an N x c matrix")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if not np.isfinite(v).all():
        raise ValueError("projected data contains non-finite values")
    if not v.any():
        raise DegenerateInputError("projected data is identically zero")
    c = v.shape[1]

    if init_rotation is not None:
        r = np.asarray(init_rotation, dtype=np.float64)
        if r.shape != (c, c):
            raise ValueError("init_rotation must be c x c")
    else:
        rng = np.random.default_rng(seed)
        q, rq = np.linalg.qr(rng.standard_normal((c, c)))
        signs = np.sign(np.diag(rq))
        signs[signs == 0] = 1.0
        r = q * signs

    losses: list[float] = []
    rotations: list[np.ndarray] = []
    n = v.shape[0]
    tol = 1e-9 * n * c
    for _ in range(iterations):
        vr = v @ r
        b = np.where(vr >= 0, 1.0, -1.0)
        losses.append(float(((b - vr) ** 2).sum()))
        u, _, vt = np.linalg.svd(b.T @ v)
        # B^T V = S Omega S_hat^T  ->  R = S_hat S^T
        r = vt.T @ u.T
        if np.abs(r.T @ r - np.eye(c)).max() > _ORTHO_TOL:
            raise ArithmeticError("rotation drifted from orthogonality")
        if track_rotations:
            rotations.append(r.copy())
    for prev, cur in zip(losses, losses[1:]):
        if cur > prev + tol:
            raise ArithmeticError("quantization loss increased beyond tolerance")

    report = ItqTrainReport(iterations=iterations, loss_per_iter=losses,
                            rotations=rotations if track_rotations else None)
    return r, report


def train_hash_model(samples: np.ndarray, code_len: int = 8,
                     iterations: int = 50, seed: int = 0
                     ) -> tuple[HashModel, ItqTrainReport]:
    """fit_pca + train_itq convenience wrapper producing a ready model."""
    mean, projection = fit_pca(samples, code_len)
    centered = np.asarray(samples, dtype=np.float64) - mean
    rotation, report = train_itq(centered @ projection, iterations, seed)
    return HashModel.from_arrays(mean, projection, rotation), report


def load_corpus(paths) -> np.ndarray:
    """Stack training vectors from FVEC matrices and/or FMAP feature maps
    (one vector per spatial location) into a single N x D corpus."""
    blocks = []
    for path in paths:
        with open(path, "rb") as fh:
            magic = fh.read(4)
        if magic == FVEC_MAGIC:
            blocks.append(read_feature_matrix(path))
        elif magic == FMAP_MAGIC:
            fmap = read_feature_map(path)
            blocks.append(fmap.data.reshape(fmap.channels, -1).T)
        else:
            raise FormatError(f"{path}: neither FVEC nor FMAP",
                              offset=0, kind="bad-magic")
    if not blocks:
        raise ValueError("no corpus files given")
    dims = {block.shape[1] for block in blocks}
    if len(dims) > 1:
        raise ValueError(f"corpus files disagree on dimension: {sorted(dims)}")
    return np.concatenate(blocks, axis=0)


def encode_vector(model: HashModel, x: np.ndarray) -> int:
    """Encode one feature vector to an integer code of model.code_len bits.

    Bit i is 1 exactly when sigmoid((x - mean) . w_i) > 0.5; the 0.5
    boundary maps to 0. Bit i sits at binary position i (LSB first).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.input_dim,):
        raise ValueError(f"expected vector of length {model.input_dim}, "
                         f"got shape {x.shape}")
    t = (x - model.mean.astype(np.float64)) @ model.weights()
    v = _sigmoid(t)
    code = 0
    for i in range(model.code_len):
        if v[i] > 0.5:
            code |= 1 << i
    return code


def encode_feature_map(model: HashModel, fmap: FeatureMap) -> BinaryCodeMap:
    """Apply the encoding layer at every feature-grid location."""
    fmap.validate()
    if fmap.channels != model.input_dim:
        raise ValueError(f"feature map has {fmap.channels} channels, "
                         f"model expects {model.input_dim}")
    h, w = fmap.height, fmap.width
    x = fmap.data.reshape(fmap.channels, h * w).T.astype(np.float64)
    t = (x - model.mean.astype(np.float64)) @ model.weights()
    bits = _sigmoid(t) > 0.5
    shifts = np.arange(model.code_len, dtype=np.uint64)
    codes = (bits.astype(np.uint64) << shifts).sum(axis=1, dtype=np.uint64)
    return BinaryCodeMap(codes=codes.reshape(h, w), code_len=model.code_len,
                         source_height=fmap.source_height,
                         source_width=fmap.source_width).validate()


# ---------------------------------------------------------------------------
# containers


def save_model(model: HashModel, path) -> None:
    """Versioned binary container: magic, dims, then mean, P, R as float32."""
    model.validate()
    d, c = model.input_dim, model.code_len
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4s3I", MODEL_MAGIC, d, c, 0))
        fh.write(np.ascontiguousarray(model.mean, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(model.projection, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(model.rotation, dtype="<f4").tobytes())


def load_model(path) -> HashModel:
    with open(path, "rb") as fh:
        buf = fh.read()
    _need(buf, 0, 4, "magic")
    if buf[:4] != MODEL_MAGIC:
        raise FormatError("bad magic, expected ITQ1", offset=0, kind="bad-magic")
    _need(buf, 4, 12, "header")
    d, c, reserved = struct.unpack_from("<3I", buf, 4)
    if reserved != 0:
        raise FormatError("reserved word must be zero", offset=12, kind="bad-reserved")
    if d < 1 or c < 1 or c > min(d, MAX_CODE_LEN):
        raise FormatError("invalid dimensions", offset=4, kind="bad-dims")
    counts = (d, d * c, c * c)
    expected = 4 * sum(counts)
    body = len(buf) - 16
    if body < expected:
        raise FormatError(f"payload holds {body} bytes, header implies {expected}",
                          offset=16, kind="size-mismatch")
    if body > expected:
        raise FormatError("trailing bytes after payload",
                          offset=16 + expected, kind="trailing-data")
    offset = 16
    arrays = []
    for count in counts:
        arrays.append(np.frombuffer(buf, dtype="<f4", count=count, offset=offset))
        offset += 4 * count
    mean = arrays[0].astype(np.float32, copy=True)
    projection = arrays[1].reshape(d, c).astype(np.float32, copy=True)
    rotation = arrays[2].reshape(c, c).astype(np.float32, copy=True)
    try:
        return HashModel(mean=mean, projection=projection,
                         rotation=rotation).validate()
    except ValueError as exc:
        raise FormatError(f"model fails validation: {exc}",
                          offset=16, kind="invalid-model") from exc


def write_binary_code_map(binmap: BinaryCodeMap, path) -> None:
    """BMAP container: magic, version, dtype, ndim, code_len, dims, payload."""
    binmap.validate()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sBBBB2I2I", BMAP_MAGIC, 1, 1, 2, binmap.code_len,
                             binmap.height, binmap.width,
                             binmap.source_height, binmap.source_width))
        fh.write(np.ascontiguousarray(binmap.codes, dtype="<u8").tobytes())


def read_binary_code_map(path) -> BinaryCodeMap:
    with open(path, "rb") as fh:
        buf = fh.read()
    _need(buf, 0, 4, "magic")
    if buf[:4] != BMAP_MAGIC:
        raise FormatError("bad magic, expected BMAP", offset=0, kind="bad-magic")
    _need(buf, 4, 4, "format bytes")
    if buf[4] != 1:
        raise FormatError(f"unsupported version {buf[4]}", offset=4, kind="bad-version")
    if buf[5] != 1:
        raise FormatError(f"unsupported dtype {buf[5]}", offset=5, kind="bad-dtype")
    if buf[6] != 2:
        raise FormatError(f"unsupported ndim {buf[6]}", offset=6, kind="bad-ndim")
    code_len = buf[7]
    if not 1 <= code_len <= MAX_CODE_LEN:
        raise FormatError(f"invalid code_len {code_len}", offset=7, kind="bad-dims")
    _need(buf, 8, 16, "dimensions")
    h, w, src_h, src_w = struct.unpack_from("<4I", buf, 8)
    if h < 1 or w < 1:
        raise FormatError("zero dimension", offset=8, kind="bad-dims")
    expected = h * w * 8
    body = len(buf) - 24
    if body < expected:
        raise FormatError(f"payload holds {body} bytes, header implies {expected}",
                          offset=24, kind="size-mismatch")
    if body > expected:
        raise FormatError("trailing bytes after payload",
                          offset=24 + expected, kind="trailing-data")
    codes = np.frombuffer(buf, dtype="<u8", count=h * w, offset=24)
    binmap = BinaryCodeMap(codes=codes.reshape(h, w).astype(np.uint64, copy=True),
                           code_len=int(code_len),
                           source_height=src_h, source_width=src_w)
    try:
        return binmap.validate()
    except ValueError as exc:
        raise FormatError(f"code map fails validation: {exc}",
                          offset=8, kind="invalid-codes") from exc
