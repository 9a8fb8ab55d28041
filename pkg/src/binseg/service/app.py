"""FastAPI wrapper around the core package for long-running, multi-client
use: train once, then serve encode/segment/eval calls against files on the
server's filesystem.
"""

import logging
import os
from functools import wraps

from fastapi import FastAPI, HTTPException

from ..egs import EgsParams, egs_segment
from ..evaluation import dataset_iou, match_segments
from ..itq import (encode_feature_map, load_corpus, load_model,
                   save_model, train_hash_model, write_binary_code_map)
from ..pipeline import (kmeans_baseline, segment_with_codes,
                        write_sidecar)
from ..slic import SlicParams, slic
from ..tensor_io import (FormatError, read_feature_map, read_image,
                         read_label_map, write_label_map)
from . import schemas

log = logging.getLogger("binseg.service")

app = FastAPI(title="binseg",
              description="Binary-code image segmentation service")


def _data_errors(fn):
    """Translate toolkit errors into HTTP status codes."""

    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except FileNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except (FormatError, ValueError, ArithmeticError, OSError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    return wrapper


@app.get("/healthz", response_model=schemas.HealthResponse)
def healthz():
    return schemas.HealthResponse(status="ok")


@app.post("/train-itq", response_model=schemas.TrainItqResponse)
@_data_errors
def train_itq(req: schemas.TrainItqRequest):
    corpus = load_corpus(req.corpus_paths)
    model, report = train_hash_model(corpus, code_len=req.code_len,
                                     iterations=req.iterations, seed=req.seed)
    save_model(model, req.model_path)
    return schemas.TrainItqResponse(
        input_dim=model.input_dim, code_len=model.code_len,
        iterations=report.iterations, final_loss=report.loss_per_iter[-1],
        model_path=req.model_path)


@app.post("/encode", response_model=schemas.EncodeResponse)
@_data_errors
def encode(req: schemas.EncodeRequest):
    model = load_model(req.model_path)
    binmap = encode_feature_map(model, read_feature_map(req.fmap_path))
    write_binary_code_map(binmap, req.out_path)
    return schemas.EncodeResponse(height=binmap.height, width=binmap.width,
                                  code_len=binmap.code_len,
                                  out_path=req.out_path)


@app.post("/slic", response_model=schemas.LabelMapResponse)
@_data_errors
def run_slic(req: schemas.SlicRequest):
    image = read_image(req.image_path)
    params = SlicParams(num_superpixels=req.num_superpixels,
                        compactness=req.compactness,
                        iterations=req.iterations)
    labels = slic(image, params, req.seed)
    write_label_map(labels, req.out_path)
    return schemas.LabelMapResponse(num_labels=labels.num_labels,
                                    out_path=req.out_path)


@app.post("/egs", response_model=schemas.LabelMapResponse)
@_data_errors
def run_egs(req: schemas.EgsRequest):
    image = read_image(req.image_path)
    params = EgsParams(sigma=req.sigma, k=req.k, min_size=req.min_size)
    labels = egs_segment(image, params)
    write_label_map(labels, req.out_path)
    return schemas.LabelMapResponse(num_labels=labels.num_labels,
                                    out_path=req.out_path)


@app.post("/segment", response_model=schemas.SegmentResponse)
@_data_errors
def segment(req: schemas.SegmentRequest):
    image = read_image(req.image_path)
    fmap = read_feature_map(req.fmap_path)
    model = load_model(req.model_path)
    params = SlicParams(num_superpixels=req.num_superpixels,
                        compactness=req.compactness,
                        iterations=req.iterations)
    result, superpixels = segment_with_codes(image, fmap, model, params,
                                             req.seed, req.merge_mode)
    write_label_map(result.labels, req.out_path)
    sidecar = req.out_path + ".txt"
    write_sidecar(result, model.code_len, sidecar)
    return schemas.SegmentResponse(num_superpixels=superpixels.num_labels,
                                   num_segments=result.labels.num_labels,
                                   out_path=req.out_path, sidecar_path=sidecar)


@app.post("/kmeans-baseline", response_model=schemas.SegmentResponse)
@_data_errors
def kmeans(req: schemas.KmeansRequest):
    image = read_image(req.image_path)
    fmap = read_feature_map(req.fmap_path)
    params = SlicParams(num_superpixels=req.num_superpixels,
                        compactness=req.compactness,
                        iterations=req.iterations)
    result, superpixels = kmeans_baseline(image, fmap, req.kmeans_k, params,
                                          req.seed, req.merge_mode)
    write_label_map(result.labels, req.out_path)
    sidecar = req.out_path + ".txt"
    write_sidecar(result, 64, sidecar)
    return schemas.SegmentResponse(num_superpixels=superpixels.num_labels,
                                   num_segments=result.labels.num_labels,
                                   out_path=req.out_path, sidecar_path=sidecar)


@app.post("/eval", response_model=schemas.EvalResponse)
@_data_errors
def evaluate(req: schemas.EvalRequest):
    pred = read_label_map(req.pred_path)
    reports = [match_segments(pred, read_label_map(path))
               for path in req.gt_paths]
    per_segment = [
        schemas.SegmentScore(gt_id=gt_id, pred_id=pred_id, iou=value)
        for report in reports
        for gt_id, pred_id, value in report.per_gt_segment
    ]
    return schemas.EvalResponse(mean_iou=dataset_iou(reports),
                                num_gt_segments=len(per_segment),
                                per_segment=per_segment)


def main() -> None:
    """Console entry point: run the service under uvicorn."""
    import uvicorn

    host = os.environ.get("BINSEG_HOST", "127.0.0.1")
    port = int(os.environ.get("BINSEG_PORT", "8000"))
    uvicorn.run("binseg.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
