"""Synthetic oracle: symmetric textured meshes raycast to image/depth/occlusion.

Scenes are exactly mirror-symmetric by construction (geometry and
appearance), which makes photo-consistency a checkable ground truth.
Rendering is unlit single-ray-per-pixel raycasting; the overall scene
scale is kept as an explicit factor so images are scale-free by
construction and ground-truth depth scales exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import (
    CameraIntrinsics,
    CameraPose,
    DegeneratePlane,
    SymmetryPlane,
    SymmetryTransform,
    plane_in_camera,
)

RAY_T_EPS = 1e-9
BARY_EPS = 1e-9
MESH_SYMMETRY_TOL = 1e-9
OCCLUSION_REL_TOL = 1e-3  # grazing re-hits of the twin's own face stay "visible"


class SceneError(ValueError):
    pass


class ParseError(SceneError):
    pass


class ValidationError(SceneError):
    pass


class HalfCrossesPlane(SceneError):
    pass


class EmptyRender(SceneError):
    pass


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray  # (N, 3) float64, object space
    triangles: np.ndarray  # (M, 3) int64
    albedo: np.ndarray | None = None  # optional (N, 3) in [0, 1]

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise SceneError("triangle index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        if self.albedo is not None:
            a = np.asarray(self.albedo, dtype=np.float64).reshape(-1, 3)
            if len(a) != len(v):
                raise SceneError("albedo must be per-vertex")
            object.__setattr__(self, "albedo", a)

    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)


@dataclass(frozen=True)
class TextureSpec:
    kind: str = "noise"  # noise | bandnoise | checker | stripes | constant | vertex
    scale: float = 6.0
    seed: int = 0
    asymmetry: float = 0.0

    def __post_init__(self):
        if self.kind not in ("noise", "bandnoise", "checker", "stripes", "constant", "vertex"):
            raise ParseError(f"unknown texture kind {self.kind!r}")
        if not 0.0 <= self.asymmetry <= 1.0:
            raise ParseError("texture asymmetry must be in [0, 1]")


@dataclass(frozen=True)
class Scene:
    mesh: TriangleMesh
    K: CameraIntrinsics
    Rt: CameraPose
    texture: TextureSpec = TextureSpec()
    symmetries: tuple = ("M2",)
    depth_range: tuple = (0.64, 1.23)
    scale: float = 1.0  # scene-unit factor; images are independent of it
    background: tuple | str = (0.5, 0.5, 0.5)  # flat gray is textureless, so only object pixels score
    occluder: TriangleMesh | None = None
    mesh_spec: dict | None = None
    occluder_spec: dict | None = None

    def __post_init__(self):
        if self.scale <= 0:
            raise ValidationError("scale must be positive")
        try:
            plane_in_camera(self.Rt)
        except DegeneratePlane as e:
            raise ValidationError(str(e)) from None
        for label in self.symmetries:
            tr = SymmetryTransform.named(label)
            if not mesh_is_symmetric(self.mesh, tr):
                raise ValidationError(f"mesh is not symmetric under {label}")

    @property
    def gt_plane(self) -> SymmetryPlane:
        """Camera-space parameters of the world plane x = 0, in scene units."""
        w = plane_in_camera(self.Rt).w / self.scale
        return SymmetryPlane(w)

    def scaled(self, c: float) -> "Scene":
        return replace(self, scale=self.scale * c)


@dataclass
class RenderOutput:
    rgb: np.ndarray  # (H, W, 3) uint8
    depth: np.ndarray  # (H, W) float32, scene units
    depth_valid: np.ndarray  # (H, W) bool, true where a ray hit geometry
    occlusion: np.ndarray  # (H, W) bool, true where the mirror twin is not visible
    object_mask: np.ndarray  # (H, W) bool, true where the symmetric mesh was hit


def mesh_is_symmetric(mesh: TriangleMesh, transform: SymmetryTransform, tol=MESH_SYMMETRY_TOL) -> bool:
    """Vertex-set equality under the transform's linear part."""
    if len(mesh.vertices) == 0:
        return True
    A = mesh.vertices
    B = A @ transform.M[:3, :3].T + transform.M[:3, 3]
    key_a = np.lexsort((A[:, 2], A[:, 1], A[:, 0]))
    key_b = np.lexsort((B[:, 2], B[:, 1], B[:, 0]))
    return bool(np.max(np.abs(A[key_a] - B[key_b])) <= tol)


def make_symmetric_mesh(half: TriangleMesh, extra_symmetry: bool = False) -> TriangleMesh:
    """Close a half-mesh (x >= 0) under the x-mirror, optionally the y-mirror."""
    if len(half.vertices) and half.vertices[:, 0].min() < -1e-9:
        raise HalfCrossesPlane("half-mesh has vertices with x < 0")
    mesh = _mirror_union(half, axis=0)
    if extra_symmetry:
        mesh = _mirror_union(mesh, axis=1)
    return mesh


def _mirror_union(mesh: TriangleMesh, axis: int) -> TriangleMesh:
    mv = mesh.vertices.copy()
    mv[:, axis] = -mv[:, axis]
    n = len(mesh.vertices)
    tris = np.vstack([mesh.triangles, mesh.triangles[:, [0, 2, 1]] + n])
    albedo = None if mesh.albedo is None else np.vstack([mesh.albedo, mesh.albedo])
    return TriangleMesh(np.vstack([mesh.vertices, mv]), tris, albedo)


# --- procedural textures ------------------------------------------------------

def _hash01(ix: np.ndarray, iy: np.ndarray, iz: np.ndarray, seed: int) -> np.ndarray:
    h = (
        ix.astype(np.int64) * 73856093
        ^ iy.astype(np.int64) * 19349663
        ^ iz.astype(np.int64) * 83492791
        ^ np.int64(seed) * 2654435761
    ) & 0x7FFFFFFF
    h = (h * 2654435761 + 1013904223) & 0x7FFFFFFF
    return h.astype(np.float64) / float(0x7FFFFFFF)


def _value_noise(p: np.ndarray, seed: int) -> np.ndarray:
    """Trilinear value noise in [0, 1] from an integer-hashed lattice."""
    i0 = np.floor(p).astype(np.int64)
    f = p - i0
    f = f * f * (3.0 - 2.0 * f)
    out = np.zeros(len(p))
    for dz in (0, 1):
        for dy in (0, 1):
            for dx in (0, 1):
                v = _hash01(i0[:, 0] + dx, i0[:, 1] + dy, i0[:, 2] + dz, seed)
                w = (
                    (f[:, 0] if dx else 1 - f[:, 0])
                    * (f[:, 1] if dy else 1 - f[:, 1])
                    * (f[:, 2] if dz else 1 - f[:, 2])
                )
                out += w * v
    return out


def _fbm(p: np.ndarray, seed: int, octaves: int = 3) -> np.ndarray:
    total = np.zeros(len(p))
    amp_sum = 0.0
    for o in range(octaves):
        amp = 0.5**o
        total += amp * _value_noise(p * (2.0**o), seed + 101 * o)
        amp_sum += amp
    return total / amp_sum


def _fold(points: np.ndarray, symmetries) -> np.ndarray:
    p = points.copy()
    if "M2" in symmetries or "M4" in symmetries:
        p[:, 0] = np.abs(p[:, 0])
    if "M3" in symmetries or "M4" in symmetries:
        p[:, 1] = np.abs(p[:, 1])
    return p


def texture_colors(points: np.ndarray, spec: TextureSpec, symmetries=("M2",)) -> np.ndarray:
    """Albedo in [0, 1] at object-space points, mirrored per the symmetries."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    p = _fold(pts, symmetries) * spec.scale
    if spec.kind == "constant":
        col = np.full((len(pts), 3), 0.6)
    elif spec.kind == "checker":
        parity = (np.floor(p).astype(np.int64).sum(axis=1) & 1).astype(np.float64)
        lo = 0.15 + 0.1 * float(
            _hash01(np.zeros(1, np.int64), np.zeros(1, np.int64), np.zeros(1, np.int64), spec.seed)[0]
        )
        shade = lo + (0.85 - lo) * parity
        col = np.stack([shade, shade * 0.95, shade * 0.9], axis=1)
    elif spec.kind == "stripes":
        phase = np.sin(p[:, 0] * 2.0 + p[:, 1]) + np.sin(p[:, 2] * 3.0)
        col = np.stack([0.5 + 0.4 * np.sin(phase + k) for k in (0.0, 2.1, 4.2)], axis=1)
        col = 0.5 + 0.5 * np.tanh(3.0 * (col - 0.5))
    elif spec.kind == "bandnoise":
        # two noise bands far apart in frequency: the coarse band keeps
        # mirrored patches partially correlated under small warp errors,
        # which widens the scoring basin around the true plane, while the
        # fine band only correlates at the exact correspondence, which
        # keeps the peak sharp
        coarse = np.stack(
            [_value_noise(p / 9.0, spec.seed + 13 * k) for k in range(3)], axis=1
        )
        fine = np.stack(
            [_value_noise(p, spec.seed + 7 + 13 * k) for k in range(3)], axis=1
        )
        col = 0.5 + 0.47 * np.tanh(3.0 * (1.3 * coarse + 0.7 * fine - 1.0))
    else:  # noise
        # Single-octave band-limited noise: its autocorrelation dies within
        # one lattice cell, so shifted copies of a patch (the classic false
        # match under a wrong plane) score poorly.
        col = np.stack([_value_noise(p, spec.seed + 13 * k) for k in range(3)], axis=1)
        col = 0.5 + 0.47 * np.tanh(4.0 * (col - 0.5))
    if spec.asymmetry > 0.0:
        blotch = _fbm(pts * spec.scale * 0.8, spec.seed + 999, octaves=2)
        mask = (pts[:, 0] > 0.0).astype(np.float64) * spec.asymmetry
        col = col * (1.0 - mask[:, None]) + mask[:, None] * blotch[:, None]
    return np.clip(col, 0.0, 1.0)


# --- raycasting ---------------------------------------------------------------

class _RayTracer:
    """Origin-at-camera raycaster with precomputed per-triangle frames."""

    def __init__(self, vertices_cam: np.ndarray, triangles: np.ndarray):
        p = vertices_cam[triangles]
        self.v0 = p[:, 0]
        e1 = p[:, 1] - self.v0
        e2 = p[:, 2] - self.v0
        n = np.cross(e1, e2)
        self.n = n
        self.v0n = np.einsum("ij,ij->i", self.v0, n)
        # gradients recovering barycentric (u, v) from a point on the plane
        n2 = np.einsum("ij,ij->i", n, n)
        n2 = np.where(n2 > 0, n2, 1.0)
        # g1.e1 = 1, g1.e2 = 0 and g2.e1 = 0, g2.e2 = 1
        self.g1 = np.cross(e2, n) / n2[:, None]
        self.g2 = np.cross(n, e1) / n2[:, None]
        self.c1 = np.einsum("ij,ij->i", self.g1, self.v0)
        self.c2 = np.einsum("ij,ij->i", self.g2, self.v0)

    def trace(self, dirs: np.ndarray, chunk_pairs: int = 4_000_000):
        """Nearest hit per ray: returns (t, tri_index); t = inf for misses."""
        T = len(self.v0)
        R = len(dirs)
        t_out = np.full(R, np.inf)
        idx_out = np.full(R, -1, dtype=np.int64)
        if T == 0:
            return t_out, idx_out
        rows = max(1, chunk_pairs // T)
        nT = self.n.T
        g1T, g2T = self.g1.T, self.g2.T
        for a in range(0, R, rows):
            d = dirs[a : a + rows]
            dn = d @ nT
            with np.errstate(divide="ignore", invalid="ignore"):
                t = self.v0n[None, :] / dn
            u = t * (d @ g1T) - self.c1[None, :]
            v = t * (d @ g2T) - self.c2[None, :]
            bad = (
                (np.abs(dn) < 1e-15)
                | (t <= RAY_T_EPS)
                | (u < -BARY_EPS)
                | (v < -BARY_EPS)
                | (u + v > 1.0 + BARY_EPS)
            )
            t = np.where(bad, np.inf, t)
            j = np.argmin(t, axis=1)
            tm = t[np.arange(len(d)), j]
            t_out[a : a + rows] = tm
            idx_out[a : a + rows] = np.where(np.isfinite(tm), j, -1)
        return t_out, idx_out


def render(scene: Scene, width: int, height: int) -> RenderOutput:
    """Raycast the scene: unlit albedo image, depth map, mirror-occlusion mask.

    Pixel (0, 0) is top-left; pixel centers sit at integer + 0.5.  Depth is
    camera-space z in scene units (the canonical geometry times the scene
    scale factor, applied as a single multiplication).
    """
    K, Rt = scene.K, scene.Rt
    verts_cam = scene.mesh.vertices @ Rt.R.T + Rt.t
    n_obj_tris = len(scene.mesh.triangles)
    all_tris = [scene.mesh.triangles]
    all_verts = [verts_cam]
    if scene.occluder is not None:
        all_tris.append(scene.occluder.triangles + len(scene.mesh.vertices))
        all_verts.append(scene.occluder.vertices @ Rt.R.T + Rt.t)
    tracer = _RayTracer(np.vstack(all_verts), np.vstack(all_tris))

    xs = (np.arange(width) + 0.5 - K.cx) / K.fx
    ys = (np.arange(height) + 0.5 - K.cy) / K.fy
    dirs = np.stack(
        [np.tile(xs, height), np.repeat(ys, width), np.ones(width * height)], axis=1
    )
    t, tri = tracer.trace(dirs)
    hit = np.isfinite(t)
    if not hit.any():
        raise EmptyRender("no pixel hits the mesh")
    on_object = hit & (tri < n_obj_tris)

    if isinstance(scene.background, str):
        # seeded screen-space speckle: decorrelated under any nonzero
        # displacement, so the background can never imitate a symmetry
        rgb = np.random.default_rng(9173).uniform(0.25, 0.75, size=(width * height, 3))
    else:
        rgb = np.tile(np.asarray(scene.background, dtype=np.float64), (width * height, 1))
    points_cam = t[hit, None] * dirs[hit]
    points_obj = (points_cam - Rt.t) @ Rt.R
    colors = np.empty((int(hit.sum()), 3))
    obj_sel = on_object[hit]
    if scene.texture.kind == "vertex" and scene.mesh.albedo is not None:
        # barycentric interpolation of per-vertex albedo
        tris = scene.mesh.triangles[tri[hit][obj_sel]]
        p = scene.mesh.vertices[tris]
        q = points_obj[obj_sel]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        rel = q - p[:, 0]
        d11 = np.einsum("ij,ij->i", e1, e1)
        d12 = np.einsum("ij,ij->i", e1, e2)
        d22 = np.einsum("ij,ij->i", e2, e2)
        r1 = np.einsum("ij,ij->i", rel, e1)
        r2 = np.einsum("ij,ij->i", rel, e2)
        det = np.where(np.abs(d11 * d22 - d12 * d12) > 1e-300, d11 * d22 - d12 * d12, 1.0)
        u = (d22 * r1 - d12 * r2) / det
        v = (d11 * r2 - d12 * r1) / det
        alb = scene.mesh.albedo[tris]
        colors[obj_sel] = (
            alb[:, 0] * (1 - u - v)[:, None] + alb[:, 1] * u[:, None] + alb[:, 2] * v[:, None]
        )
    else:
        colors[obj_sel] = texture_colors(points_obj[obj_sel], scene.texture, scene.symmetries)
    if (~obj_sel).any():
        occ_spec = replace(scene.texture, kind="noise", seed=scene.texture.seed + 31337, asymmetry=0.0)
        colors[~obj_sel] = texture_colors(points_obj[~obj_sel], occ_spec, symmetries=())
    rgb[hit] = colors
    rgb_u8 = np.clip(np.round(rgb * 255.0), 0, 255).astype(np.uint8).reshape(height, width, 3)

    depth = np.zeros(width * height, dtype=np.float32)
    depth[hit] = (t[hit] * np.float64(scene.scale)).astype(np.float32)

    # Mirror-visibility pass: reflect each object hit through the GT plane
    # and test whether that point is the first surface along its own ray.
    occl = np.zeros(width * height, dtype=bool)
    if on_object.any():
        plane_canon = plane_in_camera(Rt)  # canonical (unscaled) units
        w = plane_canon.w
        n2 = float(w @ w)
        pts = t[on_object, None] * dirs[on_object]
        mirrored = pts - (2.0 / n2) * ((pts @ w) + 1.0)[:, None] * w[None, :]
        mz = mirrored[:, 2]
        front = mz > 1e-9
        px = K.fx * mirrored[:, 0] / np.where(front, mz, 1.0) + K.cx
        py = K.fy * mirrored[:, 1] / np.where(front, mz, 1.0) + K.cy
        in_view = front & (px >= 0) & (px <= width) & (py >= 0) & (py <= height)
        bad = ~in_view
        if in_view.any():
            t2, _ = tracer.trace(mirrored[in_view])
            # the mirror point itself lies at parameter 1 along its ray
            visible = np.abs(t2 - 1.0) <= OCCLUSION_REL_TOL
            sub = np.zeros(int(on_object.sum()), dtype=bool)
            sub[in_view] = ~visible
            sub[bad] = True
            occl[on_object] = sub
        else:
            occl[on_object] = True

    return RenderOutput(
        rgb=rgb_u8,
        depth=depth.reshape(height, width),
        depth_valid=hit.reshape(height, width),
        occlusion=occl.reshape(height, width),
        object_mask=on_object.reshape(height, width),
    )


# --- primitive generators -----------------------------------------------------

def box_mesh(size=(0.3, 0.3, 0.3), center=(0.0, 0.0, 0.0), rx_deg=0.0) -> TriangleMesh:
    sx, sy, sz = (s / 2.0 for s in size)
    cx, cy, cz = center
    corners = np.array(
        [[x, y, z] for x in (-sx, sx) for y in (-sy, sy) for z in (-sz, sz)]
    )
    if rx_deg:
        # tilt about the x axis; commutes with the x-mirror, so tilted
        # boxes stay usable in mirror-symmetric assemblies
        c, s = np.cos(np.radians(rx_deg)), np.sin(np.radians(rx_deg))
        corners = corners @ np.array([[1.0, 0, 0], [0, c, s], [0, -s, c]])
    corners = corners + np.array([cx, cy, cz])
    quads = [
        (0, 1, 3, 2), (4, 6, 7, 5),  # x faces
        (0, 4, 5, 1), (2, 3, 7, 6),  # y faces
        (0, 2, 6, 4), (1, 5, 7, 3),  # z faces
    ]
    tris = []
    for a, b, c, d in quads:
        tris += [(a, b, c), (a, c, d)]
    return TriangleMesh(corners, np.array(tris, dtype=np.int64))


def blob_mesh(
    seed: int = 0,
    radius: float = 0.16,
    amp: float = 0.18,
    rings: int = 18,
    segments: int = 28,
    doubly_symmetric: bool = False,
) -> TriangleMesh:
    """Bumpy sphere, exactly closed under the x-mirror (optionally y-mirror)."""
    folds = ("M2", "M3") if doubly_symmetric else ("M2",)
    theta = np.pi * (np.arange(1, rings) / rings)
    phi = 2.0 * np.pi * np.arange(segments) / segments
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    dirs = np.stack(
        [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1
    ).reshape(-1, 3)
    poles = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    all_dirs = np.vstack([dirs, poles])
    noise = _fbm(_fold(all_dirs, folds) * 2.5, seed, octaves=2)
    r = radius * (1.0 + amp * (2.0 * noise - 1.0))
    verts = all_dirs * r[:, None]

    def vid(i, j):
        return i * segments + (j % segments)

    tris = []
    top, bot = len(dirs), len(dirs) + 1
    for j in range(segments):
        tris.append((top, vid(0, j), vid(0, j + 1)))
        tris.append((bot, vid(rings - 2, j + 1), vid(rings - 2, j)))
    for i in range(rings - 2):
        for j in range(segments):
            a, b = vid(i, j), vid(i, j + 1)
            c, d = vid(i + 1, j), vid(i + 1, j + 1)
            tris += [(a, b, c), (b, d, c)]
    return TriangleMesh(verts, np.array(tris, dtype=np.int64))


def relief_mesh(
    seed: int = 0,
    size=(0.36, 0.36),
    amp: float = 0.07,
    n: int = 24,
    doubly_symmetric: bool = False,
) -> TriangleMesh:
    """Bumpy panel in the x-y plane, exactly symmetric under the x-mirror."""
    if n % 2 != 0:
        raise SceneError("relief grid resolution must be even")
    folds = ("M2", "M3") if doubly_symmetric else ("M2",)
    hx, hy = size[0] / n, size[1] / n
    # grid built from signed integer offsets so mirrored pairs are exact
    xs = (np.arange(n + 1) - n // 2) * hx
    ys = (np.arange(n + 1) - n // 2) * hy
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    pts = np.stack([X.ravel(), Y.ravel(), np.zeros((n + 1) ** 2)], axis=1)
    z = amp * (2.0 * _fbm(_fold(pts, folds) * 9.0, seed, octaves=2) - 1.0)
    pts[:, 2] = z
    tris = []
    for i in range(n):
        for j in range(n):
            a = i * (n + 1) + j
            b, c, d = a + 1, a + n + 1, a + n + 2
            tris += [(a, b, c), (b, d, c)]
    return TriangleMesh(pts, np.array(tris, dtype=np.int64))


def _merge(meshes) -> TriangleMesh:
    verts, tris, offset = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        offset += len(m.vertices)
    return TriangleMesh(np.vstack(verts), np.vstack(tris))


def assembly_mesh(
    seed: int = 0,
    parts: int = 5,
    doubly_symmetric: bool = False,
    extent: float = 0.28,
) -> TriangleMesh:
    """Tabletop-like union of boxes: a flat slab plus mirrored part pairs.

    The dominant faces are horizontal, i.e. perpendicular to the mirror
    plane: a point and its twin on such a face are foreshortened equally,
    which keeps mirrored patch pairs comparable under windowed matching.
    """
    rng = np.random.default_rng(seed)
    e = extent
    # Two mirrored terrace slabs separated by a wide gap straddling the
    # mirror plane.  The gap keeps every mirror-pair displacement well
    # above the minimum-disparity cutoff, and the wide lever arm of the
    # outer regions makes the matched position sensitive to small plane
    # tilts, which sharpens the photo-consistency peak.
    x_in, x_out = 0.32 * e, e
    sx_slab = x_out - x_in
    cx_slab = (x_out + x_in) / 2.0
    slab = dict(size=(sx_slab, 1.05 * e, 0.06 * e))
    pieces = [
        box_mesh(center=(cx_slab, 0.0, -0.03 * e), **slab),
        box_mesh(center=(-cx_slab, 0.0, -0.03 * e), **slab),
    ]
    for _ in range(parts):
        sx = rng.uniform(0.12 * e, 0.22 * e)  # thin plates on the slabs
        sy = rng.uniform(0.12 * e, 0.20 * e)
        sz = rng.uniform(0.02 * e, 0.05 * e)
        cx = rng.uniform(x_in + sx / 2.0, x_out - sx / 2.0)
        cy = rng.uniform(-0.50 * e + sy / 2.0, 0.50 * e - sy / 2.0)
        cz = sz / 2.0
        pieces.append(box_mesh(size=(sx, sy, sz), center=(cx, cy, cz)))
        pieces.append(box_mesh(size=(sx, sy, sz), center=(-cx, cy, cz)))
        if doubly_symmetric:
            pieces.append(box_mesh(size=(sx, sy, sz), center=(cx, -cy, cz)))
            pieces.append(box_mesh(size=(sx, sy, sz), center=(-cx, -cy, cz)))
    return _merge(pieces)


def facade_mesh(
    seed: int = 0,
    parts: int = 4,
    doubly_symmetric: bool = False,
    facing=(0.87, -0.25, 0.33),
    panels: int = 6,
    panel: float = 0.52,
    depth_span: float = 2.0,
    lateral: float = 0.62,
    x_anchor: float = 0.8,
    y_offset: float = 0.0,
) -> TriangleMesh:
    """Stepped facade: flat rectangular sheets perpendicular to `facing`,
    placed at staggered offsets along it, plus the mirrored twin of every
    sheet, with a few smaller sheets floating just in front for variety.

    A sheet perpendicular to the viewing axis has constant camera-space
    depth over its whole extent, so a matching window on it needs only a
    single depth hypothesis; sheets staggered in depth make the scene span
    the hypothesis range.  Sheets are two-sided surfaces with no thickness:
    the mirror image of a sheet's visible face is the visible face of its
    twin, so mirrored texture really is present in the image.  Only the
    sheets on the `facing` side of the mirror plane are frontal; their
    twins are oblique but equally textured, which is all the reflective
    warp requires of the match target.
    """
    n = np.asarray(facing, dtype=np.float64)
    norm = np.linalg.norm(n)
    if norm < 1e-12 or abs(n[0]) / norm < 0.2:
        raise SceneError("facade facing must have a clear mirror-normal component")
    n = n / norm
    # lateral axis e1 has no mirror-normal component, so spreading sheets
    # along it leaves their distance to the mirror plane unchanged; the
    # cross axis e2 is used sparingly to keep twin displacements large
    e1 = np.array([0.0, n[2], -n[1]])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    basis = np.stack([e1, e2, n])
    # a nonzero y_offset moves the whole cluster off the second mirror
    # plane, so doubly symmetric builds get four well-separated clusters
    base = np.array([np.sign(n[0]) * x_anchor, y_offset, 0.0])

    rng = np.random.default_rng(seed)
    rows = 2
    cols = -(-panels // rows)
    slots = [
        (c - (cols - 1) / 2.0, r - (rows - 1) / 2.0)
        for r in range(rows)
        for c in range(cols)
    ][:panels]
    # staggered depths: a seeded permutation keeps laterally adjacent
    # panels apart in depth so front panels rarely hide rear ones
    order = rng.permutation(panels)
    depths = np.linspace(-depth_span / 2.0, depth_span / 2.0, panels)[order]
    depths = depths + rng.uniform(-0.06, 0.06, size=panels) * depth_span

    def oriented_sheet(center, size):
        sx, sy = size[0] / 2.0, size[1] / 2.0
        corners = np.array(
            [[-sx, -sy, 0.0], [sx, -sy, 0.0], [sx, sy, 0.0], [-sx, sy, 0.0]]
        )
        verts = corners @ basis + np.asarray(center)
        return TriangleMesh(verts, np.array([(0, 1, 2), (0, 2, 3)], dtype=np.int64))

    def with_mirrors(mesh: TriangleMesh):
        out = [mesh, TriangleMesh(mesh.vertices * [-1, 1, 1], mesh.triangles)]
        if doubly_symmetric:
            out += [TriangleMesh(m.vertices * [1, -1, 1], m.triangles) for m in out]
        return out

    pieces = []
    centers = []
    for (u, v), w in zip(slots, depths):
        side = rng.uniform(0.88, 1.12, size=2) * panel
        center = base + u * lateral * e1 + v * 0.8 * lateral * e2 + w * n
        centers.append((center, side))
        pieces += with_mirrors(oriented_sheet(center, side))
    for _ in range(parts):
        center, side = centers[int(rng.integers(len(centers)))]
        ps = rng.uniform(0.18, 0.32, size=2) * panel
        off = (
            rng.uniform(-0.5, 0.5) * (side[0] - ps[0]) * e1
            + rng.uniform(-0.5, 0.5) * (side[1] - ps[1]) * e2
            + rng.uniform(0.05, 0.12) * n
        )
        pieces += with_mirrors(oriented_sheet(center + off, ps))
    return _merge(pieces)


def valley_mesh(
    seed: int = 0,
    parts: int = 4,
    doubly_symmetric: bool = False,
    extent: float = 0.44,
    slope: float = 0.5,
) -> TriangleMesh:
    """Two planar walls hinged on the mirror plane, opening upward, plus
    mirrored block pairs resting on the walls.

    Viewed from a raised vantage point the far wall is seen near-frontally
    while its mirror twin region on the same V is also visible, so large
    areas of the image carry usable reflection correspondences.
    """
    rng = np.random.default_rng(seed)
    wx = 0.75 * extent
    wy = 0.50 * extent
    top = slope * wx
    verts = np.array(
        [
            [-wx, -wy, top], [-wx, wy, top],
            [0.0, -wy, 0.0], [0.0, wy, 0.0],
            [wx, -wy, top], [wx, wy, top],
        ]
    )
    tris = np.array([[0, 2, 1], [1, 2, 3], [2, 4, 3], [3, 4, 5]], dtype=np.int64)
    pieces = [TriangleMesh(verts, tris)]
    for _ in range(parts):
        sx, sy, sz = rng.uniform(0.07 * extent, 0.14 * extent, size=3)
        cx = rng.uniform(0.2 * wx, 0.8 * wx)
        cy = rng.uniform(-0.8 * wy, 0.8 * wy)
        cz = slope * cx + sz * 0.25
        pieces.append(box_mesh(size=(sx, sy, sz), center=(cx, cy, cz)))
        pieces.append(box_mesh(size=(sx, sy, sz), center=(-cx, cy, cz)))
        if doubly_symmetric:
            pieces.append(box_mesh(size=(sx, sy, sz), center=(cx, -cy, cz)))
            pieces.append(box_mesh(size=(sx, sy, sz), center=(-cx, -cy, cz)))
    return _merge(pieces)


_GENERATORS = {
    "box": box_mesh,
    "blob": blob_mesh,
    "relief": relief_mesh,
    "assembly": assembly_mesh,
    "facade": facade_mesh,
    "valley": valley_mesh,
}


def _mesh_from_spec(doc: dict) -> TriangleMesh:
    doc = dict(doc)
    kind = doc.pop("kind", "inline")
    if kind == "inline":
        allowed = {"vertices", "triangles", "albedo"}
        unknown = set(doc) - allowed
        if unknown:
            raise ParseError(f"unknown mesh fields: {sorted(unknown)}")
        try:
            return TriangleMesh(
                np.asarray(doc["vertices"], dtype=np.float64),
                np.asarray(doc["triangles"], dtype=np.int64),
                np.asarray(doc["albedo"], dtype=np.float64) if "albedo" in doc else None,
            )
        except KeyError as e:
            raise ParseError(f"inline mesh missing field {e}") from None
    if kind not in _GENERATORS:
        raise ParseError(f"unknown mesh kind {kind!r}")
    try:
        return _GENERATORS[kind](**doc)
    except TypeError as e:
        raise ParseError(f"bad parameters for mesh kind {kind!r}: {e}") from None


_SCENE_FIELDS = {
    "mesh",
    "camera",
    "texture",
    "symmetries",
    "depth_range",
    "scale",
    "background",
    "occluder",
}


def scene_from_spec(doc) -> Scene:
    """Build a Scene from a JSON document (text, bytes, or parsed dict)."""
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON at line {e.lineno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError("scene spec must be a JSON object")
    unknown = set(doc) - _SCENE_FIELDS
    if unknown:
        raise ParseError(f"unknown scene fields: {sorted(unknown)}")
    for req in ("mesh", "camera"):
        if req not in doc:
            raise ParseError(f"scene spec missing field {req!r}")

    cam = dict(doc["camera"])
    unknown = set(cam) - {"fx", "fy", "cx", "cy", "R", "t"}
    if unknown:
        raise ParseError(f"unknown camera fields: {sorted(unknown)}")
    try:
        K = CameraIntrinsics(float(cam["fx"]), float(cam["fy"]), float(cam["cx"]), float(cam["cy"]))
        Rt = CameraPose(np.asarray(cam["R"], dtype=np.float64).reshape(3, 3), cam["t"])
    except KeyError as e:
        raise ParseError(f"camera missing field {e}") from None

    tex_doc = dict(doc.get("texture", {}))
    unknown = set(tex_doc) - {"kind", "scale", "seed", "asymmetry"}
    if unknown:
        raise ParseError(f"unknown texture fields: {sorted(unknown)}")
    texture = TextureSpec(
        kind=tex_doc.get("kind", "noise"),
        scale=float(tex_doc.get("scale", 6.0)),
        seed=int(tex_doc.get("seed", 0)),
        asymmetry=float(tex_doc.get("asymmetry", 0.0)),
    )

    symmetries = tuple(doc.get("symmetries", ["M2"]))
    for label in symmetries:
        if label not in ("M2", "M3", "M4"):
            raise ParseError(f"unknown symmetry label {label!r}")
    depth_range = tuple(float(v) for v in doc.get("depth_range", (0.64, 1.23)))
    if len(depth_range) != 2 or not 0 < depth_range[0] < depth_range[1]:
        raise ParseError("depth_range must be [min, max] with 0 < min < max")

    mesh_spec = doc["mesh"]
    mesh = _mesh_from_spec(mesh_spec)
    occluder_spec = doc.get("occluder")
    occluder = _mesh_from_spec(occluder_spec) if occluder_spec is not None else None

    return Scene(
        mesh=mesh,
        K=K,
        Rt=Rt,
        texture=texture,
        symmetries=symmetries,
        depth_range=depth_range,
        scale=float(doc.get("scale", 1.0)),
        background=(
            doc["background"]
            if isinstance(doc.get("background"), str)
            else tuple(float(v) for v in doc.get("background", (0.5, 0.5, 0.5)))
        ),
        occluder=occluder,
        mesh_spec=mesh_spec if isinstance(mesh_spec, dict) else None,
        occluder_spec=occluder_spec,
    )


def emit_scene(scene: Scene) -> dict:
    """Round-trippable JSON document for a Scene."""
    def mesh_doc(mesh, spec):
        if spec is not None:
            return spec
        return {
            "kind": "inline",
            "vertices": mesh.vertices.tolist(),
            "triangles": mesh.triangles.tolist(),
            **({"albedo": mesh.albedo.tolist()} if mesh.albedo is not None else {}),
        }

    doc = {
        "mesh": mesh_doc(scene.mesh, scene.mesh_spec),
        "camera": {
            "fx": scene.K.fx,
            "fy": scene.K.fy,
            "cx": scene.K.cx,
            "cy": scene.K.cy,
            "R": [float(v) for v in scene.Rt.R.reshape(-1)],
            "t": [float(v) for v in scene.Rt.t],
        },
        "texture": {
            "kind": scene.texture.kind,
            "scale": scene.texture.scale,
            "seed": scene.texture.seed,
            "asymmetry": scene.texture.asymmetry,
        },
        "symmetries": list(scene.symmetries),
        "depth_range": list(scene.depth_range),
        "scale": scene.scale,
        "background": (
            scene.background if isinstance(scene.background, str) else list(scene.background)
        ),
    }
    if scene.occluder is not None:
        doc["occluder"] = mesh_doc(scene.occluder, scene.occluder_spec)
    return doc
