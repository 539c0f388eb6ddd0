"""End-to-end driver: plane detection, depth estimation, multi-symmetry fusion."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .geometry import (
    CameraIntrinsics,
    CameraPose,
    CorrespondenceMap,
    SymmetryPlane,
    SymmetryTransform,
    correspondence_from_plane,
    correspondence_general,
    plane_in_camera,
)
from .matching import (
    ConfidenceMap,
    CostVolume,
    DepthMap,
    FeatureMap,
    aggregate_cost_volume,
    build_cost_volume,
    confidence_map,
    extract_features,
    plane_score,
    soft_argmin_depth,
    volume_to_probability,
)
from .sampling import coarse_to_fine


class PipelineError(RuntimeError):
    pass


class NoValidCandidate(PipelineError):
    """Every candidate plane produced a fully invalid cost volume."""


class IdentityOnly(PipelineError):
    """The symmetry transform set is empty after excluding the identity."""


@dataclass(frozen=True)
class DetectionResult:
    w_hat: SymmetryPlane  # unit normal, plane offset fixed at 1
    score: float
    trace: list  # per-round candidates and scores


@dataclass(frozen=True)
class ReconstructionResult:
    depth: DepthMap  # full image resolution
    depth_lowres: DepthMap  # feature resolution
    confidence: ConfidenceMap  # feature resolution
    plane: SymmetryPlane
    consistency_mask: np.ndarray  # feature resolution


def _worker_count(config: RunConfig) -> int:
    if config.workers > 0:
        return config.workers
    env = os.environ.get("SYMSTEREO_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _front_facing(v) -> np.ndarray:
    """Sign of a candidate normal that puts the unit-offset plane in front.

    Samples are canonicalized only up to antipodal sign; the plane
    w^T x + 1 = 0 flips to the far side of the camera when w is negated,
    so scoring must pick the sign whose nearest plane point (-w/|w|^2)
    has positive camera-space depth.
    """
    v = np.asarray(v, dtype=np.float64)
    return -v if v[2] > 0.0 else v


def _score_volume(feat: FeatureMap, corr: CorrespondenceMap, config: RunConfig) -> float:
    mc = config.matching()
    vol = build_cost_volume(feat, corr, config.hypotheses(), mc)
    return plane_score(aggregate_cost_volume(vol), mc)


def detect_symmetry(
    image: np.ndarray, K: CameraIntrinsics, config: RunConfig = RunConfig()
) -> DetectionResult:
    """Coarse-to-fine search for the mirror-plane normal (plane offset 1).

    Features are extracted once and shared by every candidate.  Candidates
    within a round are scored concurrently; the argmax is index-ordered so
    the result is independent of the worker count.
    """
    feat = extract_features(image, config.matching())
    if not feat.valid.any():
        raise NoValidCandidate("image carries no texture to match")

    workers = _worker_count(config)

    def score_batch(candidates):
        corrs = [
            correspondence_from_plane(K, SymmetryPlane(_front_facing(c.v)))
            for c in candidates
        ]
        if workers == 1:
            return [_score_volume(feat, corr, config) for corr in corrs]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda corr: _score_volume(feat, corr, config), corrs))

    best, traces = coarse_to_fine(None, config.schedule(), score_batch_fn=score_batch)
    if all(s == 0.0 for t in traces for s in t.scores):
        raise NoValidCandidate("every candidate volume was fully invalid")
    return DetectionResult(
        w_hat=SymmetryPlane(_front_facing(best.v)), score=traces[-1].best_score, trace=traces
    )


def _upsample_bilinear(depth: DepthMap, stride: int, shape) -> DepthMap:
    """Masked bilinear upsampling from the feature grid to image resolution."""
    H, W = shape
    Hp, Wp = depth.values.shape
    xf = (np.arange(W) + 0.5) / stride - 0.5
    yf = (np.arange(H) + 0.5) / stride - 0.5
    x0 = np.clip(np.floor(xf).astype(np.int64), 0, Wp - 2)
    y0 = np.clip(np.floor(yf).astype(np.int64), 0, Hp - 2)
    tx = np.clip(xf - x0, 0.0, 1.0)[None, :]
    ty = np.clip(yf - y0, 0.0, 1.0)[:, None]
    vals = depth.values.astype(np.float64)
    m = depth.valid.astype(np.float64)
    num = np.zeros((H, W))
    den = np.zeros((H, W))
    for dy, wy in ((0, 1 - ty), (1, ty)):
        for dx, wx in ((0, 1 - tx), (1, tx)):
            w = wy * wx
            num += w * (vals * m)[np.ix_(y0 + dy, x0 + dx)]
            den += w * m[np.ix_(y0 + dy, x0 + dx)]
    valid = den > 1e-12
    out = np.where(valid, num / np.where(valid, den, 1.0), 0.0)
    return DepthMap(values=out.astype(np.float32), valid=valid)


def reflective_consistency_filter(
    depth: DepthMap,
    corr: CorrespondenceMap,
    threshold: float,
    stride: int,
) -> np.ndarray:
    """Mirror analog of a left-right check on the feature-resolution depth map.

    A pixel passes when warping it with its own depth lands on a valid
    pixel whose depth agrees with the warp-implied depth within
    threshold * depth.  Invalid warps fail.
    """
    if not threshold > 0:
        raise PipelineError("consistency threshold must be positive")
    Hp, Wp = depth.values.shape
    C = np.asarray(corr.C, dtype=np.float64)
    xs = ((np.arange(Wp) + 0.5) * stride)[None, :]
    ys = ((np.arange(Hp) + 0.5) * stride)[:, None]
    d = depth.values.astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_d = np.where(depth.valid & (d > 0), 1.0 / np.where(d > 0, d, 1.0), 0.0)
    v0 = C[0, 0] * xs + C[0, 1] * ys + C[0, 2] + C[0, 3] * inv_d
    v1 = C[1, 0] * xs + C[1, 1] * ys + C[1, 2] + C[1, 3] * inv_d
    v2 = C[2, 0] * xs + C[2, 1] * ys + C[2, 2] + C[2, 3] * inv_d
    v3 = C[3, 0] * xs + C[3, 1] * ys + C[3, 2] + C[3, 3] * inv_d
    ok = depth.valid & (np.abs(v2) >= 1e-12)
    safe = np.where(np.abs(v2) >= 1e-12, v2, 1.0)
    inv_dp = v3 / safe
    ok &= inv_dp > 0.0
    dp = 1.0 / np.where(inv_dp > 0, inv_dp, 1.0)
    xf = (v0 / safe) / stride - 0.5
    yf = (v1 / safe) / stride - 0.5
    ok &= (xf >= 0) & (xf <= Wp - 1) & (yf >= 0) & (yf <= Hp - 1)
    xf = np.where(ok, xf, 0.0)
    yf = np.where(ok, yf, 0.0)

    x0 = np.clip(np.floor(xf).astype(np.int64), 0, Wp - 2)
    y0 = np.clip(np.floor(yf).astype(np.int64), 0, Hp - 2)
    tx, ty = xf - x0, yf - y0
    m = depth.valid.astype(np.float64)
    num = np.zeros_like(d)
    den = np.zeros_like(d)
    flat_v = (d * m).ravel()
    flat_m = m.ravel()
    for dy, wy in ((0, 1 - ty), (1, ty)):
        for dx, wx in ((0, 1 - tx), (1, tx)):
            idx = (y0 + dy) * Wp + (x0 + dx)
            w = wy * wx
            num += w * flat_v[idx]
            den += w * flat_m[idx]
    ok &= den > 1e-12
    sampled = num / np.where(den > 1e-12, den, 1.0)
    return ok & (np.abs(sampled - dp) <= threshold * dp)


def _reconstruct_from_volume(
    volume: CostVolume,
    corr: CorrespondenceMap,
    plane: SymmetryPlane,
    config: RunConfig,
    image_shape,
) -> ReconstructionResult:
    mc = config.matching()
    agg = aggregate_cost_volume(volume)
    prob = volume_to_probability(agg, mc.temperature)
    depth_lr = soft_argmin_depth(prob)
    conf = confidence_map(prob)
    mask = reflective_consistency_filter(depth_lr, corr, config.consistency_eps, mc.stride)
    depth_full = _upsample_bilinear(depth_lr, mc.stride, image_shape)
    return ReconstructionResult(
        depth=depth_full,
        depth_lowres=depth_lr,
        confidence=conf,
        plane=plane,
        consistency_mask=mask,
    )


def estimate_depth(
    image: np.ndarray,
    K: CameraIntrinsics,
    plane: SymmetryPlane,
    config: RunConfig = RunConfig(),
) -> ReconstructionResult:
    """Reflective plane-sweep depth for a known symmetry plane."""
    mc = config.matching()
    feat = extract_features(image, mc)
    corr = correspondence_from_plane(K, plane)
    vol = build_cost_volume(feat, corr, config.hypotheses(), mc)
    return _reconstruct_from_volume(vol, corr, plane, config, feat.image_shape)


def multi_symmetry_depth(
    image: np.ndarray,
    K: CameraIntrinsics,
    Rt: CameraPose,
    transforms,
    config: RunConfig = RunConfig(),
) -> ReconstructionResult:
    """Depth from several symmetry transforms fused into one cost volume.

    Per-cell fusion is the validity-weighted mean of the individual
    volumes, so a transform whose correspondence is unavailable at a pixel
    simply drops out there.
    """
    transforms = [
        t if isinstance(t, SymmetryTransform) else SymmetryTransform.named(t)
        for t in transforms
    ]
    transforms = [t for t in transforms if not t.is_identity]
    if not transforms:
        raise IdentityOnly("need at least one non-identity symmetry transform")
    mc = config.matching()
    feat = extract_features(image, mc)
    hyp = config.hypotheses()
    corrs = [correspondence_general(K, Rt, t) for t in transforms]
    num = None
    den = None
    for corr in corrs:
        vol = build_cost_volume(feat, corr, hyp, mc)
        m = vol.valid.astype(np.float64)
        contrib = vol.values.astype(np.float64) * m
        num = contrib if num is None else num + contrib
        den = m if den is None else den + m
    valid = den > 0
    values = np.where(valid, num / np.where(valid, den, 1.0), mc.cost_ceiling).astype(np.float32)
    fused = CostVolume(values=values, valid=valid, hyp=hyp)
    plane = plane_in_camera(Rt)
    return _reconstruct_from_volume(fused, corrs[0], plane, config, feat.image_shape)
