"""Camera and reflection-symmetry algebra.

Everything lives in homogeneous R^4 with the pixel-space convention
x = [u, v, 1, 1/d]^T, so intrinsics, extrinsics, mirror transforms and
pixel correspondences are all plain 4x4 matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

# Tolerances used by constructors and invariant checks; tests may pass
# their own values where an operation takes an explicit epsilon.
ORTHO_TOL = 1e-9
INVOLUTION_TOL = 1e-12
W2_EPS = 1e-12  # |third homogeneous component| below this -> at infinity
DEGENERATE_OFFSET_EPS = 1e-9


class GeometryError(ValueError):
    pass


class DegeneratePlane(GeometryError):
    """Symmetry plane passes through the camera center."""


class WarpFailure(Enum):
    AT_INFINITY = "at_infinity"
    BEHIND_CAMERA = "behind_camera"


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise GeometryError("focal lengths must be positive")

    @classmethod
    def identity(cls) -> "CameraIntrinsics":
        return cls(1.0, 1.0, 0.0, 0.0)


@dataclass(frozen=True)
class CameraPose:
    """World-to-camera transform X_cam = R @ X_world + t."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.t, dtype=np.float64).reshape(3)
        if np.max(np.abs(R.T @ R - np.eye(3))) > ORTHO_TOL:
            raise GeometryError("R is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > ORTHO_TOL:
            raise GeometryError("R must have determinant +1")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    def embed(self) -> np.ndarray:
        Rt = np.eye(4)
        Rt[:3, :3] = self.R
        Rt[:3, 3] = self.t
        return Rt


@dataclass(frozen=True)
class SymmetryPlane:
    """Plane w^T x + 1 = 0 in camera space; w is the scaled normal."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(w)) or np.linalg.norm(w) == 0.0:
            raise GeometryError("plane parameter w must be finite and nonzero")
        object.__setattr__(self, "w", w)

    @property
    def normal(self) -> np.ndarray:
        return self.w / np.linalg.norm(self.w)

    @property
    def distance(self) -> float:
        """Distance from the camera center to the plane."""
        return 1.0 / float(np.linalg.norm(self.w))

    @classmethod
    def from_normal(cls, direction) -> "SymmetryPlane":
        """Unit-offset plane (distance 1) with the given normal direction."""
        v = np.asarray(direction, dtype=np.float64).reshape(3)
        n = np.linalg.norm(v)
        if n == 0.0:
            raise GeometryError("zero direction")
        return cls(v / n)


_TRANSFORM_DIAGS = {
    "M2": (-1.0, 1.0, 1.0),
    "M3": (1.0, -1.0, 1.0),
    "M4": (-1.0, -1.0, 1.0),
}


@dataclass(frozen=True)
class SymmetryTransform:
    """Object-space involution, e.g. diag(-1, 1, 1, 1) for an x-mirror."""

    M: np.ndarray
    label: str = ""

    def __post_init__(self):
        M = np.asarray(self.M, dtype=np.float64).reshape(4, 4)
        if np.max(np.abs(M @ M - np.eye(4))) > INVOLUTION_TOL:
            raise GeometryError("M must be an involution (M @ M = I)")
        object.__setattr__(self, "M", M)

    @classmethod
    def named(cls, label: str) -> "SymmetryTransform":
        if label not in _TRANSFORM_DIAGS:
            raise GeometryError(f"unknown symmetry transform {label!r}")
        return cls(np.diag(_TRANSFORM_DIAGS[label] + (1.0,)), label)

    @property
    def is_identity(self) -> bool:
        return bool(np.allclose(self.M, np.eye(4), atol=1e-12))


@dataclass(frozen=True)
class CorrespondenceMap:
    """4x4 map C from pixel-depth coordinates to their mirror twins."""

    C: np.ndarray
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        C = np.asarray(self.C, dtype=np.float64).reshape(4, 4)
        object.__setattr__(self, "C", C)


@dataclass(frozen=True)
class PixelDepth:
    x: float
    y: float
    d: float

    def __post_init__(self):
        if not self.d > 0:
            raise GeometryError("depth must be positive")


def intrinsics_embed(K: CameraIntrinsics) -> np.ndarray:
    """4x4 embedding of the pinhole intrinsics acting on [X, Y, Z, 1]/d."""
    return np.array(
        [
            [K.fx, 0.0, K.cx, 0.0],
            [0.0, K.fy, K.cy, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def intrinsics_embed_inv(K: CameraIntrinsics) -> np.ndarray:
    return np.array(
        [
            [1.0 / K.fx, 0.0, -K.cx / K.fx, 0.0],
            [0.0, 1.0 / K.fy, -K.cy / K.fy, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def mirror_matrix(plane: SymmetryPlane) -> np.ndarray:
    """Householder-style reflection across w^T x + 1 = 0 in camera space."""
    w = plane.w
    n2 = float(w @ w)
    M = np.eye(4)
    M[:3, :3] -= 2.0 / n2 * np.outer(w, w)
    M[:3, 3] = -2.0 / n2 * w
    return M


def correspondence_from_plane(K: CameraIntrinsics, plane: SymmetryPlane) -> CorrespondenceMap:
    C = intrinsics_embed(K) @ mirror_matrix(plane) @ intrinsics_embed_inv(K)
    return CorrespondenceMap(C, source={"K": K, "w": plane.w.copy()})


def correspondence_general(
    K: CameraIntrinsics, Rt: CameraPose, M: SymmetryTransform
) -> CorrespondenceMap:
    Kt = intrinsics_embed(K)
    Rte = Rt.embed()
    C = Kt @ Rte @ M.M @ np.linalg.inv(Rte) @ intrinsics_embed_inv(K)
    return CorrespondenceMap(C, source={"K": K, "Rt": Rt, "M": M.label or "custom"})


def warp_pixel(corr: CorrespondenceMap, p: PixelDepth):
    """Map (x, y, d) to its mirror correspondence (x', y', d').

    Returns a PixelDepth, or a WarpFailure when the correspondence is at
    infinity or lands behind the camera.  Invalid results are reported
    rather than clamped so cost volumes never absorb garbage samples.
    """
    v = corr.C @ np.array([p.x, p.y, 1.0, 1.0 / p.d])
    if abs(v[2]) < W2_EPS:
        return WarpFailure.AT_INFINITY
    inv_d = v[3] / v[2]
    if inv_d < 0.0:
        return WarpFailure.BEHIND_CAMERA
    d = np.inf if inv_d == 0.0 else 1.0 / inv_d
    return PixelDepth(float(v[0] / v[2]), float(v[1] / v[2]), float(d))


def plane_in_camera(Rt: CameraPose, world_normal=(1.0, 0.0, 0.0)) -> SymmetryPlane:
    """Camera-space parameters of a world plane through the origin.

    The default is the world plane x = 0 used for ground-truth symmetry.
    """
    n = np.asarray(world_normal, dtype=np.float64)
    a = Rt.R @ (n / np.linalg.norm(n))
    b = float(a @ Rt.t)
    if abs(b) < DEGENERATE_OFFSET_EPS:
        raise DegeneratePlane("symmetry plane passes through the camera center")
    return SymmetryPlane(-a / b)


def angle_error(w1: SymmetryPlane | np.ndarray, w2: SymmetryPlane | np.ndarray) -> float:
    """Angle in degrees between two plane normals, antipodally identified."""
    a = w1.w if isinstance(w1, SymmetryPlane) else np.asarray(w1, dtype=np.float64)
    b = w2.w if isinstance(w2, SymmetryPlane) else np.asarray(w2, dtype=np.float64)
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    c = min(abs(float(a @ b)), 1.0)
    return float(np.degrees(np.arccos(c)))


def canonical_sign(v: np.ndarray) -> np.ndarray:
    """Flip sign so the first nonzero component is positive."""
    v = np.asarray(v, dtype=np.float64)
    for comp in v:
        if comp != 0.0:
            return v if comp > 0 else -v
    return v
