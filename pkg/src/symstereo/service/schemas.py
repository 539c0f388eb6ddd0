"""Pydantic request/response models for the HTTP service.

Images travel as base64 PNG, depth maps as base64 PFM (NaN = invalid),
mirroring the on-disk formats the CLI uses.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class CameraModel(BaseModel):
    fx: float
    fy: float
    cx: float
    cy: float
    R: list[float] | None = None  # row-major 3x3, world-to-camera
    t: list[float] | None = None

    model_config = {"extra": "forbid"}


class RenderRequest(BaseModel):
    scene: dict  # scene spec document
    width: int = Field(default=256, ge=8, le=4096)
    height: int = Field(default=256, ge=8, le=4096)

    model_config = {"extra": "forbid"}


class RenderResponse(BaseModel):
    rgb_png: str  # base64 PNG
    depth_pfm: str  # base64 PFM, NaN = invalid
    occlusion_png: str
    object_png: str
    w_gt: list[float]
    depth_range: list[float]


class DetectRequest(BaseModel):
    image_png: str  # base64 PNG
    camera: CameraModel
    config: dict | None = None

    model_config = {"extra": "forbid"}


class RoundTraceModel(BaseModel):
    delta: float
    center: list[float]
    best_index: int
    best_score: float
    candidate_count: int


class DetectResponse(BaseModel):
    w_hat: list[float]
    score: float
    trace: list[RoundTraceModel]


class DepthRequest(BaseModel):
    image_png: str
    camera: CameraModel
    w: list[float] | None = None  # camera-space plane; omit to detect first
    transforms: list[str] | None = None  # fuse these instead (needs R, t)
    config: dict | None = None

    model_config = {"extra": "forbid"}


class DepthResponse(BaseModel):
    depth_pfm: str
    confidence_pfm: str
    plane: list[float]
    mean_confidence: float


class MetricsRequest(BaseModel):
    pred_pfm: str
    gt_pfm: str
    w_gt: list[float] | None = None  # with w_hat, rescales pred first
    w_hat: list[float] | None = None

    model_config = {"extra": "forbid"}


class MetricsResponse(BaseModel):
    silog: float
    absrel: float
    sqrel: float
    rmse: float
    mean_l1: float
    median_l1: float
    pixel_count: int
    angle_error_deg: float | None = None


class HealthResponse(BaseModel):
    status: str
    version: str
