"""Depth-map evaluation: scale alignment, error statistics, error curves.

Metric formulas follow the KITTI depth-prediction conventions (natural
log, no percentage scaling).  All statistics are computed over an
explicit validity mask shared by prediction and ground truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np


class MetricsError(ValueError):
    pass


class EmptyMask(MetricsError):
    pass


class NonPositiveDepth(MetricsError):
    pass


@dataclass(frozen=True)
class MetricsReport:
    silog: float
    absrel: float
    sqrel: float
    rmse: float
    mean_l1: float
    median_l1: float
    pixel_count: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        return cls(**json.loads(text))


@dataclass(frozen=True)
class CurveData:
    """Empirical CDF of errors: sorted thresholds with cumulative fractions."""

    thresholds: np.ndarray
    fractions: np.ndarray

    def fraction_below(self, threshold: float) -> float:
        return float(np.searchsorted(self.thresholds, threshold, side="right")) / len(
            self.thresholds
        )

    def to_csv(self) -> str:
        lines = ["threshold,fraction"]
        lines += [f"{t!r},{f!r}" for t, f in zip(self.thresholds, self.fractions)]
        return "\n".join(lines) + "\n"


def rescale_depth(pred: np.ndarray, w_gt, w_hat) -> np.ndarray:
    """Map predicted depths from the unit-offset convention to GT scale."""
    n_gt = np.linalg.norm(np.asarray(w_gt, dtype=np.float64).reshape(-1))
    n_hat = np.linalg.norm(np.asarray(w_hat, dtype=np.float64).reshape(-1))
    if n_gt == 0.0 or n_hat == 0.0:
        raise MetricsError("plane parameters must be nonzero")
    return pred * (n_hat / n_gt)


def _lower_median(values: np.ndarray) -> float:
    v = np.sort(values)
    return float(v[(len(v) - 1) // 2])


def depth_metrics(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray) -> MetricsReport:
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyMask("no valid pixels")
    p = np.asarray(pred, dtype=np.float64)[mask]
    g = np.asarray(gt, dtype=np.float64)[mask]
    if np.any(p <= 0) or np.any(g <= 0):
        raise NonPositiveDepth("masked depths must be positive")
    e = np.log(p) - np.log(g)
    diff = p - g
    return MetricsReport(
        silog=float(np.mean(e**2) - np.mean(e) ** 2),
        absrel=float(np.mean(np.abs(diff) / g)),
        sqrel=float(np.mean(diff**2 / g)),
        rmse=float(np.sqrt(np.mean(diff**2))),
        mean_l1=float(np.mean(np.abs(diff))),
        median_l1=_lower_median(np.abs(diff)),
        pixel_count=int(mask.sum()),
    )


def error_percentage_curve(errors) -> CurveData:
    errors = np.asarray(errors, dtype=np.float64).reshape(-1)
    if errors.size == 0:
        raise EmptyMask("no errors given")
    thresholds = np.sort(errors)
    fractions = np.arange(1, errors.size + 1, dtype=np.float64) / errors.size
    return CurveData(thresholds=thresholds, fractions=fractions)


def l_dpt(pred: np.ndarray, gt: np.ndarray, w_gt, w_hat, mask: np.ndarray) -> float:
    """Mean l1 between prediction and scale-aligned ground truth."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyMask("no valid pixels")
    gt_aligned = rescale_depth(np.asarray(gt, dtype=np.float64), w_gt, w_hat)
    return float(np.mean(np.abs(np.asarray(pred, dtype=np.float64)[mask] - gt_aligned[mask])))
