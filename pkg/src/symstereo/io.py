"""File formats: PFM depth maps, 8-bit PNGs, raw volume blobs, camera JSON."""

from __future__ import annotations

import contextlib
import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import CameraIntrinsics, CameraPose

VOLUME_MAGIC = b"SYMV"


class FormatError(ValueError):
    pass


def _open(path_or_file, mode):
    """Accept a filesystem path or an already-open binary file object."""
    if hasattr(path_or_file, "read") or hasattr(path_or_file, "write"):
        return contextlib.nullcontext(path_or_file)
    return open(path_or_file, mode)


def write_pfm(path, depth: np.ndarray, mask: np.ndarray | None = None) -> None:
    """Grayscale PFM, little-endian (scale header -1.0), bottom-up rows.

    Invalid pixels are encoded as NaN.
    """
    depth = np.asarray(depth, dtype=np.float32)
    if depth.ndim != 2:
        raise FormatError("PFM writer expects a 2D map")
    data = depth.copy()
    if mask is not None:
        data[~np.asarray(mask, dtype=bool)] = np.nan
    h, w = data.shape
    with _open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(data[::-1].astype("<f4").tobytes())


def read_pfm(path):
    """Returns (depth, mask) with mask false where the file stored NaN."""
    with _open(path, "rb") as f:
        header = f.readline().strip()
        if header != b"Pf":
            raise FormatError(f"bad PFM header line {header!r} (expected 'Pf')")
        dims = f.readline().split()
        if len(dims) != 2:
            raise FormatError(f"bad PFM dimension line {dims!r}")
        w, h = int(dims[0]), int(dims[1])
        scale_line = f.readline().strip()
        try:
            scale = float(scale_line)
        except ValueError:
            raise FormatError(f"bad PFM scale line {scale_line!r}") from None
        endian = "<f4" if scale < 0 else ">f4"
        raw = f.read(4 * w * h)
        if len(raw) != 4 * w * h:
            raise FormatError("truncated PFM payload")
    data = np.frombuffer(raw, dtype=endian).reshape(h, w)[::-1]
    data = data.astype(np.float32)
    mask = np.isfinite(data)
    return data, mask


def write_png(path, image: np.ndarray) -> None:
    """8-bit PNG from an HxW (gray/mask) or HxWx3 array in [0, 255]."""
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        arr = np.clip(np.round(arr), 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path, format="PNG")


def read_png(path) -> np.ndarray:
    return np.asarray(Image.open(path))


def write_volume(path, volume: np.ndarray, valid: np.ndarray | None = None) -> None:
    """Raw float32 blob with a 16-byte header: magic 'SYMV', u32 H, W, D.

    Invalid cells are stored as NaN.
    """
    vol = np.asarray(volume, dtype=np.float32)
    if vol.ndim != 3:
        raise FormatError("volume must be HxWxD")
    data = vol.copy()
    if valid is not None:
        data[~np.asarray(valid, dtype=bool)] = np.nan
    h, w, d = data.shape
    with _open(path, "wb") as f:
        f.write(VOLUME_MAGIC)
        f.write(struct.pack("<III", h, w, d))
        f.write(data.astype("<f4").tobytes())


def read_volume(path):
    with _open(path, "rb") as f:
        magic = f.read(4)
        if magic != VOLUME_MAGIC:
            raise FormatError(f"bad volume magic {magic!r}")
        h, w, d = struct.unpack("<III", f.read(12))
        data = np.frombuffer(f.read(4 * h * w * d), dtype="<f4").reshape(h, w, d)
    data = data.astype(np.float32)
    return data, np.isfinite(data)


def camera_to_dict(K: CameraIntrinsics, Rt: CameraPose | None = None) -> dict:
    out = {"fx": K.fx, "fy": K.fy, "cx": K.cx, "cy": K.cy}
    if Rt is not None:
        out["R"] = [float(v) for v in Rt.R.reshape(-1)]
        out["t"] = [float(v) for v in Rt.t]
    return out


def camera_from_dict(doc: dict):
    """Parse {fx,fy,cx,cy[,R,t]} into (intrinsics, pose or None)."""
    try:
        K = CameraIntrinsics(float(doc["fx"]), float(doc["fy"]), float(doc["cx"]), float(doc["cy"]))
    except KeyError as e:
        raise FormatError(f"camera file missing field {e}") from None
    Rt = None
    if "R" in doc or "t" in doc:
        if "R" not in doc or "t" not in doc:
            raise FormatError("camera file must give both R and t or neither")
        Rt = CameraPose(np.asarray(doc["R"], dtype=np.float64).reshape(3, 3), doc["t"])
    return K, Rt


def load_camera(path):
    return camera_from_dict(json.loads(Path(path).read_text()))
