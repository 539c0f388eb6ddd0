"""Reflective plane-sweep matching: features, cost volumes, depth regression.

Descriptors are classical (luma + gradients + census); the per-cell
matching cost is windowed ZNCC blended with a census Hamming fraction.
Volume construction is fully vectorized with integral-image window sums
so the same math runs per candidate plane in tens of milliseconds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CorrespondenceMap, W2_EPS

_POP8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)


class MatchingError(ValueError):
    pass


class ImageTooSmall(MatchingError):
    pass


@dataclass(frozen=True)
class MatchingConfig:
    stride: int = 4  # feature downsample factor
    census_window: int = 5
    patch_radius: int = 3  # matching window is (2r+1)^2 at feature resolution
    alpha: float = 0.3  # census weight in the blended cost
    cost_ceiling: float = 1.5
    temperature: float = 0.1  # softmax temperature for the depth distribution
    score_temperature: float = 0.5  # temperature of the per-plane score
    var_eps: float = 1e-12  # windows with variance below this are textureless
    # Minimum warp displacement (image pixels).  Every ray crosses the
    # hypothesis plane at some depth where a pixel corresponds to itself;
    # such near-identity warps match perfectly for any plane and carry no
    # depth signal, so they are marked invalid.
    min_disparity: float = 70.0


@dataclass(frozen=True)
class FeatureMap:
    gray: np.ndarray  # (H', W') float32 luma in [0, 1]
    gradx: np.ndarray
    grady: np.ndarray
    census: np.ndarray  # (H', W') uint32 bit-packed census signature
    census_flip: np.ndarray  # same signature with a left-right mirrored bit layout
    valid: np.ndarray  # (H', W') bool, true where the patch carries texture
    stride: int
    census_bits: int
    image_shape: tuple

    @property
    def shape(self):
        return self.gray.shape


@dataclass(frozen=True)
class DepthHypotheses:
    d_min: float
    d_max: float
    count: int

    def __post_init__(self):
        if not (0.0 < self.d_min < self.d_max):
            raise MatchingError("need 0 < d_min < d_max")
        if self.count < 2:
            raise MatchingError("need at least two depth hypotheses")

    @property
    def grid(self) -> np.ndarray:
        i = np.arange(self.count, dtype=np.float64)
        return self.d_min + i / (self.count - 1) * (self.d_max - self.d_min)

    @property
    def step(self) -> float:
        return (self.d_max - self.d_min) / (self.count - 1)


@dataclass(frozen=True)
class CostVolume:
    values: np.ndarray  # (H', W', D) float32, lower is better
    valid: np.ndarray  # (H', W', D) bool
    hyp: DepthHypotheses


@dataclass(frozen=True)
class ProbabilityVolume:
    values: np.ndarray  # (H', W', D) float32, sums to 1 along depth where valid
    valid: np.ndarray
    pixel_valid: np.ndarray  # (H', W') bool
    hyp: DepthHypotheses


@dataclass(frozen=True)
class DepthMap:
    values: np.ndarray
    valid: np.ndarray


@dataclass(frozen=True)
class ConfidenceMap:
    values: np.ndarray  # (H', W') in [0, 1]


def to_gray(image: np.ndarray) -> np.ndarray:
    """Rec.601 luma in [0, 1] from uint8 or float RGB/grayscale input."""
    arr = np.asarray(image)
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float32) / 255.0
    else:
        arr = arr.astype(np.float32)
    if arr.ndim == 3:
        arr = arr[..., 0] * 0.299 + arr[..., 1] * 0.587 + arr[..., 2] * 0.114
    return arr.astype(np.float32)


def box_sum2d(a: np.ndarray, r: int, dtype=np.float64) -> np.ndarray:
    """Sum over the (2r+1)^2 window clipped at the borders, any trailing axes."""
    H, W = a.shape[:2]
    P = np.zeros((H + 1, W + 1) + a.shape[2:], dtype=dtype)
    np.cumsum(a, axis=0, dtype=dtype, out=P[1:, 1:])
    np.cumsum(P[1:, 1:], axis=1, out=P[1:, 1:])
    # edge-replicated pad turns the border clipping into pure slicing
    Pe = np.pad(P, ((r, r), (r, r)) + ((0, 0),) * (a.ndim - 2), mode="edge")
    k = 2 * r + 1
    return (
        Pe[k : k + H, k : k + W]
        - Pe[:H, k : k + W]
        - Pe[k : k + H, :W]
        + Pe[:H, :W]
    )


def extract_features(image: np.ndarray, config: MatchingConfig = MatchingConfig()) -> FeatureMap:
    """Stride-s descriptor grid: mean-pooled luma, gradients, census bits.

    Census compares each pixel of the (census_window)^2 neighborhood
    against the center (strict greater-than, edge-replicated borders) and
    packs the bits into a uint32.  A second signature with a left-right
    mirrored bit layout is kept alongside it: a reflective correspondence
    is orientation-reversing, so the signature of a patch must be compared
    against the mirrored-layout signature of its counterpart.  The
    validity mask marks feature cells whose matching window has nonzero
    luma variance.
    """
    s = config.stride
    gray_full = to_gray(image)
    H, W = gray_full.shape
    if H < s or W < s:
        raise ImageTooSmall(f"image {H}x{W} smaller than stride {s}")
    Hp, Wp = H // s, W // s
    gray = gray_full[: Hp * s, : Wp * s].reshape(Hp, s, Wp, s).mean(axis=(1, 3))
    gray = gray.astype(np.float32)

    padded = np.pad(gray, 1, mode="edge")
    gradx = ((padded[1:-1, 2:] - padded[1:-1, :-2]) * 0.5).astype(np.float32)
    grady = ((padded[2:, 1:-1] - padded[:-2, 1:-1]) * 0.5).astype(np.float32)

    cw = config.census_window
    rc = cw // 2
    padc = np.pad(gray, rc, mode="edge")
    census = np.zeros((Hp, Wp), dtype=np.uint32)
    census_flip = np.zeros((Hp, Wp), dtype=np.uint32)
    bit = 0
    for dy in range(-rc, rc + 1):
        for dx in range(-rc, rc + 1):
            if dy == 0 and dx == 0:
                continue
            nb = padc[rc + dy : rc + dy + Hp, rc + dx : rc + dx + Wp]
            census |= (nb > gray).astype(np.uint32) << np.uint32(bit)
            nbf = padc[rc + dy : rc + dy + Hp, rc - dx : rc - dx + Wp]
            census_flip |= (nbf > gray).astype(np.uint32) << np.uint32(bit)
            bit += 1

    r = config.patch_radius
    n = box_sum2d(np.ones_like(gray, dtype=np.float64), r)
    sg = box_sum2d(gray, r)
    sgg = box_sum2d(gray.astype(np.float64) ** 2, r)
    var = sgg / n - (sg / n) ** 2
    valid = var > config.var_eps

    return FeatureMap(
        gray=gray,
        gradx=gradx,
        grady=grady,
        census=census,
        census_flip=census_flip,
        valid=valid,
        stride=s,
        census_bits=cw * cw - 1,
        image_shape=(H, W),
    )


def depth_hypotheses(d_min: float, d_max: float, count: int) -> DepthHypotheses:
    return DepthHypotheses(float(d_min), float(d_max), int(count))


def _popcount(x: np.ndarray) -> np.ndarray:
    return (
        _POP8[x & 0xFF]
        + _POP8[(x >> np.uint32(8)) & 0xFF]
        + _POP8[(x >> np.uint32(16)) & 0xFF]
        + _POP8[(x >> np.uint32(24)) & 0xFF]
    )


def matching_cost(
    gray_a: np.ndarray,
    gray_b: np.ndarray,
    census_a: np.ndarray | None = None,
    census_b: np.ndarray | None = None,
    config: MatchingConfig = MatchingConfig(),
    census_bits: int = 24,
) -> float:
    """Reference scalar cost between two descriptor windows.

    (1 - ZNCC) truncated at the ceiling, blended with the census Hamming
    fraction.  Either window having zero variance yields the neutral cost
    1.0 (textureless patches match nothing and everything).
    """
    a = np.asarray(gray_a, dtype=np.float64).reshape(-1)
    b = np.asarray(gray_b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise MatchingError("windows must have the same size")
    va = np.mean(a**2) - np.mean(a) ** 2
    vb = np.mean(b**2) - np.mean(b) ** 2
    if va < config.var_eps or vb < config.var_eps:
        return 1.0
    zncc = float(np.mean((a - a.mean()) * (b - b.mean())) / np.sqrt(va * vb))
    cost = min(max(1.0 - zncc, 0.0), config.cost_ceiling)
    if census_a is not None and census_b is not None:
        ham = float(
            np.mean(_popcount(np.asarray(census_a, dtype=np.uint32) ^ np.asarray(census_b, dtype=np.uint32)))
            / census_bits
        )
        cost = (1.0 - config.alpha) * cost + config.alpha * ham
    return cost


def warp_grid(
    corr: CorrespondenceMap, feat_shape, stride: int, hyp: DepthHypotheses
):
    """Warped feature-grid coordinates for every (cell, depth hypothesis).

    Returns (xf, yf, d_prime, valid) of shape (H', W', D); xf/yf are
    fractional indices into the feature grid.
    """
    Hp, Wp = feat_shape
    C = np.asarray(corr.C, dtype=np.float64)
    xs = ((np.arange(Wp) + 0.5) * stride)[None, :, None]
    ys = ((np.arange(Hp) + 0.5) * stride)[:, None, None]
    inv_d = (1.0 / hyp.grid)[None, None, :]

    v0 = C[0, 0] * xs + C[0, 1] * ys + C[0, 2] + C[0, 3] * inv_d
    v1 = C[1, 0] * xs + C[1, 1] * ys + C[1, 2] + C[1, 3] * inv_d
    v2 = C[2, 0] * xs + C[2, 1] * ys + C[2, 2] + C[2, 3] * inv_d
    v3 = C[3, 0] * xs + C[3, 1] * ys + C[3, 2] + C[3, 3] * inv_d

    ok = np.abs(v2) >= W2_EPS
    safe_v2 = np.where(ok, v2, 1.0)
    inv_dp = v3 / safe_v2
    ok &= inv_dp >= 0.0
    with np.errstate(divide="ignore"):
        d_prime = np.where(inv_dp > 0, 1.0 / np.where(inv_dp > 0, inv_dp, 1.0), np.inf)
    xf = (v0 / safe_v2) / stride - 0.5
    yf = (v1 / safe_v2) / stride - 0.5
    inb = (xf >= 0.0) & (xf <= Wp - 1) & (yf >= 0.0) & (yf <= Hp - 1)
    valid = ok & inb
    xf = np.where(valid, xf, 0.0)
    yf = np.where(valid, yf, 0.0)
    return xf, yf, d_prime, valid


def build_cost_volume(
    feat: FeatureMap,
    corr: CorrespondenceMap,
    hyp: DepthHypotheses,
    config: MatchingConfig = MatchingConfig(),
) -> CostVolume:
    """Reflective plane-sweep cost volume.

    For every feature cell and depth hypothesis, the cell's image-space
    center is warped through the correspondence map; luma is sampled
    bilinearly and census nearest-neighbor at the warped location.  Window
    statistics exclude cells whose own warp is invalid or out of bounds.
    """
    Hp, Wp = feat.shape
    D = hyp.count
    xf, yf, _, valid = warp_grid(corr, feat.shape, feat.stride, hyp)
    if config.min_disparity > 0.0:
        dx = xf - np.arange(Wp)[None, :, None]
        dy = yf - np.arange(Hp)[:, None, None]
        min_cells = config.min_disparity / feat.stride
        valid = valid & (dx * dx + dy * dy >= min_cells * min_cells)

    x0 = np.clip(np.floor(xf).astype(np.int64), 0, Wp - 2)
    y0 = np.clip(np.floor(yf).astype(np.int64), 0, Hp - 2)
    tx = (xf - x0).astype(np.float32)
    ty = (yf - y0).astype(np.float32)
    flat = feat.gray.ravel()
    idx = y0 * Wp + x0
    g00 = flat[idx]
    g01 = flat[idx + 1]
    g10 = flat[idx + Wp]
    g11 = flat[idx + Wp + 1]
    warped = (1 - ty) * ((1 - tx) * g00 + tx * g01) + ty * ((1 - tx) * g10 + tx * g11)

    xn = np.clip(np.rint(xf).astype(np.int64), 0, Wp - 1)
    yn = np.clip(np.rint(yf).astype(np.int64), 0, Hp - 1)
    # the correspondence is orientation-reversing, so the warped patch is
    # compared through the mirrored-layout census signature
    census_w = feat.census_flip.ravel()[yn * Wp + xn]
    ham = _popcount(feat.census[:, :, None] ^ census_w).astype(np.float32) / feat.census_bits

    # window sums in float32: the grid is small (<= a few hundred cells per
    # side), so integral-image cancellation error stays ~1e-4
    m = valid.astype(np.float32)
    g = warped.astype(np.float32)
    f = feat.gray[:, :, None]
    r = config.patch_radius
    n = box_sum2d(m, r, dtype=np.float32)
    Sw = box_sum2d(g * m, r, dtype=np.float32)
    Sww = box_sum2d(g * g * m, r, dtype=np.float32)
    Sf = box_sum2d(f * m, r, dtype=np.float32)
    Sff = box_sum2d(f * f * m, r, dtype=np.float32)
    Sfw = box_sum2d(f * g * m, r, dtype=np.float32)
    Sh = box_sum2d(ham * m, r, dtype=np.float32)

    with np.errstate(invalid="ignore", divide="ignore"):
        nn = np.where(n > 0, n, np.float32(1.0))
        mw, mf = Sw / nn, Sf / nn
        var_w = Sww / nn - mw * mw
        var_f = Sff / nn - mf * mf
        cov = Sfw / nn - mf * mw
        # float32 cancellation floor: treat tiny variances as textureless
        var_floor = np.float32(max(config.var_eps, 1e-8))
        textured = (var_w > var_floor) & (var_f > var_floor)
        denom = np.sqrt(np.where(textured, var_f * var_w, np.float32(1.0)))
        zncc = np.where(textured, cov / denom, np.float32(0.0))
        cost_z = np.clip(np.float32(1.0) - zncc, np.float32(0.0), np.float32(config.cost_ceiling))
        cost = np.float32(1.0 - config.alpha) * cost_z + np.float32(config.alpha) * (Sh / nn)
        cost = np.where(textured, cost, np.float32(1.0))

    valid_cell = valid & feat.valid[:, :, None] & (n > 0)
    values = np.where(valid_cell, cost, config.cost_ceiling).astype(np.float32)
    return CostVolume(values=values, valid=valid_cell, hyp=hyp)


def _box_sum_depth(a: np.ndarray, r: int) -> np.ndarray:
    H, W, D = a.shape
    P = np.zeros((H, W, D + 1), dtype=np.float64)
    P[:, :, 1:] = np.cumsum(a, axis=2, dtype=np.float64)
    k = np.arange(D)
    k1, k2 = np.maximum(k - r, 0), np.minimum(k + r, D - 1) + 1
    return P[:, :, k2] - P[:, :, k1]


def aggregate_cost_volume(
    volume: CostVolume, spatial_radius: int = 2, depth_radius: int = 1
) -> CostVolume:
    """Masked separable mean filter: 5x5 spatial by 3 deep (defaults).

    Invalid cells neither contribute to nor receive averages.
    """
    m = volume.valid.astype(np.float32)
    num = _box_sum_depth(box_sum2d(volume.values * m, spatial_radius, dtype=np.float32), depth_radius)
    den = _box_sum_depth(box_sum2d(m, spatial_radius, dtype=np.float32), depth_radius)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    values = np.where(volume.valid, out, volume.values).astype(np.float32)
    return CostVolume(values=values, valid=volume.valid, hyp=volume.hyp)


def volume_to_probability(volume: CostVolume, temperature: float) -> ProbabilityVolume:
    """Softmax of the negated costs along the depth dimension."""
    if not temperature > 0:
        raise MatchingError("temperature must be positive")
    logits = np.where(volume.valid, -volume.values.astype(np.float64) / temperature, -np.inf)
    pixel_valid = volume.valid.any(axis=2)
    peak = np.max(logits, axis=2, keepdims=True)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    e = np.exp(logits - peak)
    total = e.sum(axis=2, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(total > 0, e / np.where(total > 0, total, 1.0), 0.0)
    return ProbabilityVolume(
        values=p.astype(np.float32), valid=volume.valid, pixel_valid=pixel_valid, hyp=volume.hyp
    )


def soft_argmin_depth(prob: ProbabilityVolume, hyp: DepthHypotheses | None = None) -> DepthMap:
    """Expected depth under the per-pixel distribution, clamped to the range."""
    hyp = hyp or prob.hyp
    d = hyp.grid.astype(np.float64)
    expect = np.tensordot(prob.values.astype(np.float64), d, axes=([2], [0]))
    values = np.clip(expect, hyp.d_min, hyp.d_max).astype(np.float32)
    return DepthMap(values=values, valid=prob.pixel_valid.copy())


def confidence_map(prob: ProbabilityVolume) -> ConfidenceMap:
    """Probability mass of the 4 hypotheses around the per-pixel argmax.

    The 4-wide window is shifted (not shrunk) at the volume ends; invalid
    pixels get confidence 0.
    """
    D = prob.values.shape[2]
    width = min(4, D)
    arg = np.argmax(prob.values, axis=2)
    start = np.clip(arg - 1, 0, D - width)
    csum = np.concatenate(
        [np.zeros(prob.values.shape[:2] + (1,), np.float64), np.cumsum(prob.values, axis=2, dtype=np.float64)],
        axis=2,
    )
    conf = np.take_along_axis(csum, (start + width)[:, :, None], axis=2) - np.take_along_axis(
        csum, start[:, :, None], axis=2
    )
    out = np.where(prob.pixel_valid, np.clip(conf[:, :, 0], 0.0, 1.0), 0.0)
    return ConfidenceMap(values=out.astype(np.float32))


def plane_score(volume: CostVolume, config: MatchingConfig = MatchingConfig()) -> float:
    """Photo-consistency score of a candidate plane, in [0, 1]."""
    pixel_valid = volume.valid.any(axis=2)
    if not pixel_valid.any():
        return 0.0
    best = np.where(volume.valid, volume.values, np.inf).min(axis=2)
    return float(np.mean(np.exp(-best[pixel_valid].astype(np.float64) / config.score_temperature)))
