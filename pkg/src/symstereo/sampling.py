"""Fibonacci-lattice sampling on spherical caps and coarse-to-fine search.

Plane normals are antipodally identified: every sample is canonicalized
so its first nonzero component is positive, and cap membership is tested
through arccos(|<a, b>|).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import GeometryError, canonical_sign

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))

# Published coarse-to-fine schedule: cap radii for rounds 2..K in degrees.
DEFAULT_DELTAS = (20.7, 6.44, 1.99, 0.61)
DEFAULT_CANDIDATES = 64


@dataclass(frozen=True)
class Direction:
    """Unit vector with canonical sign (first nonzero component positive)."""

    v: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=np.float64).reshape(3)
        n = np.linalg.norm(v)
        if n == 0.0 or not np.all(np.isfinite(v)):
            raise GeometryError("direction must be finite and nonzero")
        object.__setattr__(self, "v", canonical_sign(v / n))


@dataclass(frozen=True)
class SphericalCap:
    center: Direction
    delta: float  # angular radius, degrees

    def __post_init__(self):
        if not (0.0 < self.delta <= 90.0):
            raise GeometryError("cap radius must be in (0, 90] degrees")

    @classmethod
    def full_sphere(cls) -> "SphericalCap":
        # delta = 90 about any axis covers the projective sphere.
        return cls(Direction(np.array([0.0, 0.0, 1.0])), 90.0)


@dataclass(frozen=True)
class ScheduleConfig:
    """Coarse-to-fine schedule: cap radii for rounds >= 2, candidates per round."""

    deltas: tuple = DEFAULT_DELTAS
    candidates_per_round: int = DEFAULT_CANDIDATES

    def __post_init__(self):
        deltas = tuple(float(d) for d in self.deltas)
        if any(b >= a for a, b in zip(deltas, deltas[1:])):
            raise GeometryError("cap radii must be strictly decreasing")
        if self.candidates_per_round < 2:
            raise GeometryError("need at least 2 candidates per round")
        object.__setattr__(self, "deltas", deltas)

    @property
    def rounds(self) -> int:
        return len(self.deltas) + 1


def _cap_basis(center: np.ndarray):
    """Deterministic orthonormal basis (e1, e2) of the plane normal to center."""
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(center)))] = 1.0
    e1 = np.cross(center, axis)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(center, e1)
    return e1, e2


def fibonacci_cap(cap: SphericalCap, n: int) -> list[Direction]:
    """n near-uniform directions in the cap via a golden-angle spiral.

    Colatitude is area-uniform in [0, delta]; azimuth advances by the
    golden angle.  A single sample sits exactly at the cap center.
    """
    if n < 1:
        raise GeometryError("sample count must be >= 1")
    if n == 1:
        return [cap.center]
    c = cap.center.v
    e1, e2 = _cap_basis(c)
    cos_delta = np.cos(np.radians(cap.delta))
    k = np.arange(n, dtype=np.float64)
    z = 1.0 - (k + 0.5) / n * (1.0 - cos_delta)
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = k * GOLDEN_ANGLE
    pts = (
        np.outer(r * np.cos(phi), e1)
        + np.outer(r * np.sin(phi), e2)
        + np.outer(z, c)
    )
    return [Direction(p) for p in pts]


def cap_contains(cap: SphericalCap, v: Direction) -> bool:
    c = min(abs(float(cap.center.v @ v.v)), 1.0)
    return bool(np.degrees(np.arccos(c)) < cap.delta)


@dataclass
class RoundTrace:
    cap: SphericalCap
    candidates: list = field(default_factory=list)
    scores: list = field(default_factory=list)
    best_index: int = -1

    @property
    def best_score(self) -> float:
        return self.scores[self.best_index]

    @property
    def best(self) -> Direction:
        return self.candidates[self.best_index]


def _argmax_first(scores) -> int:
    best, best_i = -np.inf, 0
    for i, s in enumerate(scores):
        if s > best:
            best, best_i = s, i
    return best_i


def coarse_to_fine(score_fn, schedule: ScheduleConfig, score_batch_fn=None):
    """Maximize score_fn over directions with shrinking spherical caps.

    Round 1 samples the full projective sphere; round i >= 2 samples a cap
    of radius schedule.deltas[i-2] around the previous best, which is
    re-included as candidate 0 so refinement never regresses.  Ties break
    toward the lowest candidate index.  Returns (best, traces).
    """
    n = schedule.candidates_per_round
    traces: list[RoundTrace] = []
    best: Direction | None = None
    for rnd in range(schedule.rounds):
        if rnd == 0:
            cap = SphericalCap.full_sphere()
            candidates = fibonacci_cap(cap, n)
        else:
            cap = SphericalCap(best, schedule.deltas[rnd - 1])
            candidates = [best] + fibonacci_cap(cap, n - 1)
        if score_batch_fn is not None:
            scores = [float(s) for s in score_batch_fn(candidates)]
        else:
            scores = [float(score_fn(c)) for c in candidates]
        trace = RoundTrace(cap=cap, candidates=candidates, scores=scores)
        trace.best_index = _argmax_first(scores)
        traces.append(trace)
        best = trace.best
    return best, traces
