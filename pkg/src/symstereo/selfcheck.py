"""Lightweight built-in invariant checks, runnable without pytest.

Each check covers one algebraic contract of the core library; the CLI
`selfcheck` subcommand runs them all and reports pass/fail per check.
"""

from __future__ import annotations

import numpy as np

from .geometry import (
    CameraIntrinsics,
    PixelDepth,
    SymmetryPlane,
    WarpFailure,
    correspondence_from_plane,
    mirror_matrix,
    warp_pixel,
)
from .matching import MatchingConfig, depth_hypotheses, matching_cost
from .metrics import depth_metrics
from .sampling import Direction, SphericalCap, cap_contains, fibonacci_cap


def _check_mirror_involution(rng):
    for _ in range(50):
        w = rng.normal(size=3)
        w /= np.linalg.norm(w) * rng.uniform(0.5, 2.0)
        M = mirror_matrix(SymmetryPlane(w))
        if not np.allclose(M @ M, np.eye(4), atol=1e-12):
            return False
    return True


def _check_warp_involution(rng):
    K = CameraIntrinsics(fx=540.0, fy=540.0, cx=128.0, cy=128.0)
    for _ in range(50):
        w = rng.normal(size=3)
        w /= np.linalg.norm(w)
        corr = correspondence_from_plane(K, SymmetryPlane(w))
        x, y = rng.uniform(0, 256, size=2)
        d = rng.uniform(0.64, 1.23)
        fwd = warp_pixel(corr, PixelDepth(x, y, d))
        if isinstance(fwd, WarpFailure) or not np.isfinite(fwd.d):
            continue
        back = warp_pixel(corr, fwd)
        if isinstance(back, WarpFailure):
            return False
        if not np.allclose([back.x, back.y, back.d], [x, y, d], atol=1e-6):
            return False
    return True


def _check_cap_membership(rng):
    for _ in range(10):
        c = rng.normal(size=3)
        cap = SphericalCap(Direction(c), 25.0)
        pts = fibonacci_cap(cap, 64)
        if not all(cap_contains(cap, p) for p in pts):
            return False
    return True


def _check_hypotheses(_):
    hyp = depth_hypotheses(0.64, 1.23, 64)
    g = hyp.grid
    return (
        g.shape == (64,)
        and abs(g[0] - 0.64) < 1e-12
        and abs(g[-1] - 1.23) < 1e-12
        and np.allclose(np.diff(g), g[1] - g[0])
    )


def _check_neutral_cost(_):
    cfg = MatchingConfig()
    flat = np.full(25, 0.5)
    cost = matching_cost(flat, flat, 0, 0, cfg)
    return abs(cost - 1.0) < 1e-12


def _check_silog_scale(_):
    rng = np.random.default_rng(0)
    gt = rng.uniform(0.7, 1.2, size=(16, 16))
    pred = gt * rng.uniform(0.9, 1.1, size=gt.shape)
    mask = np.ones_like(gt, dtype=bool)
    a = depth_metrics(pred, gt, mask).silog
    b = depth_metrics(pred * 7.0, gt * 7.0, mask).silog
    return abs(a - b) < 1e-12


CHECKS = [
    ("mirror matrix is an involution", _check_mirror_involution),
    ("pixel warp is its own inverse", _check_warp_involution),
    ("cap samples stay inside the cap", _check_cap_membership),
    ("depth hypothesis grid endpoints and spacing", _check_hypotheses),
    ("textureless windows get neutral cost", _check_neutral_cost),
    ("silog is invariant to common depth scale", _check_silog_scale),
]


def run_selfcheck(verbose: bool = False) -> bool:
    rng = np.random.default_rng(1234)
    ok = True
    for name, fn in CHECKS:
        passed = bool(fn(rng))
        ok &= passed
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok
