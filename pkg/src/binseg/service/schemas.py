"""Request/response models for the segmentation service.

The service operates on server-side file paths so that every artifact stays
in the bit-exact containers the toolkit defines; responses carry the summary
numbers a client usually wants without re-reading the files.
"""

from pydantic import BaseModel, Field

from ..segmenter import MERGE_MODES


class HealthResponse(BaseModel):
    status: str


class TrainItqRequest(BaseModel):
    corpus_paths: list[str] = Field(min_length=1)
    code_len: int = 8
    iterations: int = 50
    seed: int = 0
    model_path: str


class TrainItqResponse(BaseModel):
    input_dim: int
    code_len: int
    iterations: int
    final_loss: float
    model_path: str


class EncodeRequest(BaseModel):
    model_path: str
    fmap_path: str
    out_path: str


class EncodeResponse(BaseModel):
    height: int
    width: int
    code_len: int
    out_path: str


class SlicRequest(BaseModel):
    image_path: str
    num_superpixels: int = 200
    compactness: float = 10.0
    iterations: int = 10
    seed: int = 0
    out_path: str


class EgsRequest(BaseModel):
    image_path: str
    sigma: float = 1.0
    k: float = 100.0
    min_size: int = 20
    out_path: str


class LabelMapResponse(BaseModel):
    num_labels: int
    out_path: str


class SegmentRequest(BaseModel):
    image_path: str
    fmap_path: str
    model_path: str
    num_superpixels: int = 200
    compactness: float = 10.0
    iterations: int = 10
    seed: int = 0
    merge_mode: str = Field(default="adjacency",
                            pattern="^(" + "|".join(MERGE_MODES) + ")$")
    out_path: str


class SegmentResponse(BaseModel):
    num_superpixels: int
    num_segments: int
    out_path: str
    sidecar_path: str


class KmeansRequest(BaseModel):
    image_path: str
    fmap_path: str
    kmeans_k: int = 256
    num_superpixels: int = 200
    compactness: float = 10.0
    iterations: int = 10
    seed: int = 0
    merge_mode: str = Field(default="adjacency",
                            pattern="^(" + "|".join(MERGE_MODES) + ")$")
    out_path: str


class EvalRequest(BaseModel):
    pred_path: str
    gt_paths: list[str] = Field(min_length=1)


class SegmentScore(BaseModel):
    gt_id: int
    pred_id: int
    iou: float


class EvalResponse(BaseModel):
    mean_iou: float
    num_gt_segments: int
    per_segment: list[SegmentScore]
