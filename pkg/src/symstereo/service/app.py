"""HTTP wrapper around the core library.

Thin layer: decode payloads, call the same functions the CLI uses, encode
results.  Client errors map to 400 (bad payloads) and 422 (inputs that
fail domain validation, e.g. degenerate poses or textureless images).
"""

from __future__ import annotations

import base64
import io as _io

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from .. import io as sio
from ..config import ConfigError, RunConfig
from ..geometry import GeometryError, SymmetryPlane, angle_error
from ..matching import MatchingError
from ..metrics import MetricsError, depth_metrics, rescale_depth
from ..pipeline import PipelineError, detect_symmetry, estimate_depth, multi_symmetry_depth
from ..scene import SceneError, render, scene_from_spec
from .schemas import (
    DepthRequest,
    DepthResponse,
    DetectRequest,
    DetectResponse,
    HealthResponse,
    MetricsRequest,
    MetricsResponse,
    RenderRequest,
    RenderResponse,
    RoundTraceModel,
)

_CLIENT_ERRORS = (
    SceneError,
    ConfigError,
    GeometryError,
    MatchingError,
    MetricsError,
    PipelineError,
    ValueError,
)


def _decode_png(b64: str) -> np.ndarray:
    try:
        return sio.read_png(_io.BytesIO(base64.b64decode(b64)))
    except Exception as e:
        raise HTTPException(status_code=400, detail=f"bad PNG payload: {e}") from None


def _encode_png(image: np.ndarray) -> str:
    buf = _io.BytesIO()
    sio.write_png(buf, image)
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _decode_pfm(b64: str):
    try:
        return sio.read_pfm(_io.BytesIO(base64.b64decode(b64)))
    except Exception as e:
        raise HTTPException(status_code=400, detail=f"bad PFM payload: {e}") from None


def _encode_pfm(values: np.ndarray, mask: np.ndarray | None = None) -> str:
    buf = _io.BytesIO()
    sio.write_pfm(buf, values, mask)
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _camera(model):
    doc = model.model_dump(exclude_none=True)
    try:
        return sio.camera_from_dict(doc)
    except (sio.FormatError, GeometryError) as e:
        raise HTTPException(status_code=422, detail=str(e)) from None


def _config(doc: dict | None) -> RunConfig:
    if doc is None:
        return RunConfig()
    try:
        return RunConfig.from_dict(doc)
    except _CLIENT_ERRORS as e:
        raise HTTPException(status_code=422, detail=str(e)) from None


def create_app() -> FastAPI:
    app = FastAPI(
        title="symstereo",
        version=__version__,
        description="Mirror-plane detection and reflective stereo depth from one image.",
    )

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/render", response_model=RenderResponse)
    def render_scene(req: RenderRequest) -> RenderResponse:
        try:
            scene = scene_from_spec(req.scene)
            out = render(scene, req.width, req.height)
        except _CLIENT_ERRORS as e:
            raise HTTPException(status_code=422, detail=str(e)) from None
        return RenderResponse(
            rgb_png=_encode_png(out.rgb),
            depth_pfm=_encode_pfm(out.depth, out.depth_valid),
            occlusion_png=_encode_png(out.occlusion.astype(np.uint8) * 255),
            object_png=_encode_png(out.object_mask.astype(np.uint8) * 255),
            w_gt=[float(v) for v in scene.gt_plane.w],
            depth_range=list(scene.depth_range),
        )

    @app.post("/detect", response_model=DetectResponse)
    def detect(req: DetectRequest) -> DetectResponse:
        image = _decode_png(req.image_png)
        K, _ = _camera(req.camera)
        config = _config(req.config)
        try:
            result = detect_symmetry(image, K, config)
        except _CLIENT_ERRORS as e:
            raise HTTPException(status_code=422, detail=str(e)) from None
        return DetectResponse(
            w_hat=[float(v) for v in result.w_hat.w],
            score=result.score,
            trace=[
                RoundTraceModel(
                    delta=t.cap.delta,
                    center=[float(v) for v in t.cap.center.v],
                    best_index=t.best_index,
                    best_score=t.best_score,
                    candidate_count=len(t.candidates),
                )
                for t in result.trace
            ],
        )

    @app.post("/depth", response_model=DepthResponse)
    def depth(req: DepthRequest) -> DepthResponse:
        image = _decode_png(req.image_png)
        K, Rt = _camera(req.camera)
        config = _config(req.config)
        try:
            if req.transforms is not None:
                if Rt is None:
                    raise HTTPException(
                        status_code=422, detail="transforms require a camera pose (R, t)"
                    )
                result = multi_symmetry_depth(image, K, Rt, req.transforms, config)
            else:
                if req.w is not None:
                    plane = SymmetryPlane(np.asarray(req.w, dtype=np.float64))
                else:
                    plane = detect_symmetry(image, K, config).w_hat
                result = estimate_depth(image, K, plane, config)
        except _CLIENT_ERRORS as e:
            raise HTTPException(status_code=422, detail=str(e)) from None
        return DepthResponse(
            depth_pfm=_encode_pfm(result.depth.values, result.depth.valid),
            confidence_pfm=_encode_pfm(result.confidence.values),
            plane=[float(v) for v in result.plane.w],
            mean_confidence=float(np.mean(result.confidence.values)),
        )

    @app.post("/metrics", response_model=MetricsResponse)
    def metrics(req: MetricsRequest) -> MetricsResponse:
        pred, pm = _decode_pfm(req.pred_pfm)
        gt, gm = _decode_pfm(req.gt_pfm)
        angle = None
        try:
            if req.w_gt is not None and req.w_hat is not None:
                pred = rescale_depth(pred, req.w_gt, req.w_hat)
                angle = angle_error(
                    np.asarray(req.w_gt, dtype=np.float64),
                    np.asarray(req.w_hat, dtype=np.float64),
                )
            report = depth_metrics(pred, gt, pm & gm)
        except _CLIENT_ERRORS as e:
            raise HTTPException(status_code=422, detail=str(e)) from None
        return MetricsResponse(
            silog=report.silog,
            absrel=report.absrel,
            sqrel=report.sqrel,
            rmse=report.rmse,
            mean_l1=report.mean_l1,
            median_l1=report.median_l1,
            pixel_count=report.pixel_count,
            angle_error_deg=angle,
        )

    return app


app = create_app()
