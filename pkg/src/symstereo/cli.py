"""Command-line surface: render, detect, depth, multi, eval, curves, selfcheck, bench.

Exit codes: 0 success, 2 usage error, 3 I/O error, 4 validation error.
Worker count comes from --workers, else the SYMSTEREO_WORKERS environment
variable, else all cores.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import io as sio
from .config import ConfigError, RunConfig
from .geometry import GeometryError, SymmetryPlane, angle_error
from .matching import MatchingError
from .metrics import MetricsError, depth_metrics, error_percentage_curve, rescale_depth
from .pipeline import PipelineError, detect_symmetry, estimate_depth, multi_symmetry_depth
from .scene import SceneError, emit_scene, render, scene_from_spec

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_VALIDATION = 4


def _load_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = RunConfig.from_json(Path(args.config).read_text())
    if getattr(args, "workers", None) is not None:
        cfg = RunConfig.from_dict({**cfg.to_dict(), "workers": args.workers})
    return cfg


def _trace_record(traces) -> list:
    return [
        {
            "delta": t.cap.delta,
            "center": [float(v) for v in t.cap.center.v],
            "candidates": [[float(v) for v in c.v] for c in t.candidates],
            "scores": t.scores,
            "best_index": t.best_index,
        }
        for t in traces
    ]


def _result_record(config: RunConfig, timings: dict | None, **fields) -> dict:
    rec = dict(fields)
    rec["config"] = config.to_dict()
    if timings is not None:
        rec["timings"] = timings
    return rec


def _write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_render(args) -> int:
    spec_text = Path(args.spec).read_text()
    scene = scene_from_spec(spec_text)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = render(scene, args.width, args.height)
    sio.write_png(out / "rgb.png", result.rgb)
    sio.write_pfm(out / "depth.pfm", result.depth, result.depth_valid)
    sio.write_png(out / "occlusion.png", result.occlusion.astype(np.uint8) * 255)
    sio.write_png(out / "object.png", result.object_mask.astype(np.uint8) * 255)
    gt = {
        "w": [float(v) for v in scene.gt_plane.w],
        "camera": emit_scene(scene)["camera"],
        "depth_range": list(scene.depth_range),
        "scale": scene.scale,
    }
    _write_json(out / "gt.json", gt)
    return 0


def cmd_detect(args) -> int:
    config = _load_config(args)
    image = sio.read_png(args.image)
    K, _ = sio.load_camera(args.camera)
    t0 = time.perf_counter()
    result = detect_symmetry(image, K, config)
    timings = None if args.no_timings else {"detect_s": time.perf_counter() - t0}
    rec = _result_record(
        config,
        timings,
        w_hat=[float(v) for v in result.w_hat.w],
        score=result.score,
        trace=_trace_record(result.trace),
    )
    _write_json(args.out, rec)
    return 0


def _plane_from_args(args) -> SymmetryPlane:
    if args.plane:
        doc = json.loads(Path(args.plane).read_text())
        w = doc["w"] if isinstance(doc, dict) and "w" in doc else doc.get("w_hat", doc)
        return SymmetryPlane(np.asarray(w, dtype=np.float64))
    raise ConfigError("a plane file is required")


def cmd_depth(args) -> int:
    config = _load_config(args)
    image = sio.read_png(args.image)
    K, _ = sio.load_camera(args.camera)
    plane = _plane_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = estimate_depth(image, K, plane, config)
    timings = None if args.no_timings else {"depth_s": time.perf_counter() - t0}
    sio.write_pfm(out / "depth.pfm", result.depth.values, result.depth.valid)
    sio.write_pfm(out / "confidence.pfm", result.confidence.values)
    sio.write_png(out / "consistency.png", result.consistency_mask.astype(np.uint8) * 255)
    rec = _result_record(
        config,
        timings,
        plane=[float(v) for v in result.plane.w],
        mean_confidence=float(np.mean(result.confidence.values)),
    )
    _write_json(out / "result.json", rec)
    return 0


def cmd_multi(args) -> int:
    config = _load_config(args)
    image = sio.read_png(args.image)
    K, Rt = sio.load_camera(args.camera)
    if Rt is None:
        raise ConfigError("multi requires a camera file with R and t")
    transforms = [s.strip() for s in args.transforms.split(",") if s.strip()]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = multi_symmetry_depth(image, K, Rt, transforms, config)
    timings = None if args.no_timings else {"multi_s": time.perf_counter() - t0}
    sio.write_pfm(out / "depth.pfm", result.depth.values, result.depth.valid)
    sio.write_pfm(out / "confidence.pfm", result.confidence.values)
    rec = _result_record(
        config,
        timings,
        plane=[float(v) for v in result.plane.w],
        transforms=transforms,
    )
    _write_json(out / "result.json", rec)
    return 0


def _load_mask(args, shape) -> np.ndarray:
    if args.mask:
        return sio.read_png(args.mask) > 127
    return np.ones(shape, dtype=bool)


def cmd_eval(args) -> int:
    pred, pred_mask = sio.read_pfm(args.pred)
    gt, gt_mask = sio.read_pfm(args.gt)
    mask = pred_mask & gt_mask & _load_mask(args, gt.shape)
    if args.pred_plane and args.gt_plane:
        w_hat = json.loads(Path(args.pred_plane).read_text())
        w_gt = json.loads(Path(args.gt_plane).read_text())
        w_hat = w_hat.get("w_hat", w_hat.get("w")) if isinstance(w_hat, dict) else w_hat
        w_gt = w_gt.get("w") if isinstance(w_gt, dict) else w_gt
        pred = rescale_depth(pred, w_gt, w_hat)
        angle = angle_error(np.asarray(w_gt, dtype=np.float64), np.asarray(w_hat, dtype=np.float64))
    else:
        angle = None
    report = depth_metrics(pred, gt, mask)
    doc = json.loads(report.to_json())
    if angle is not None:
        doc["angle_error_deg"] = angle
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_curves(args) -> int:
    pred, pred_mask = sio.read_pfm(args.pred)
    gt, gt_mask = sio.read_pfm(args.gt)
    mask = pred_mask & gt_mask & _load_mask(args, gt.shape)
    if not mask.any():
        raise MetricsError("no overlapping valid pixels")
    errors = np.abs(pred[mask] - gt[mask])
    curve = error_percentage_curve(errors)
    Path(args.out).write_text(curve.to_csv())
    return 0


def cmd_selfcheck(args) -> int:
    from .selfcheck import run_selfcheck

    ok = run_selfcheck(verbose=True)
    return 0 if ok else 1


def cmd_bench(args) -> int:
    from .benchmark import benchmark_scene
    from .geometry import correspondence_from_plane
    from .matching import build_cost_volume, extract_features

    config = _load_config(args)
    scene = benchmark_scene(0)
    img = render(scene, 256, 256).rgb
    feat = extract_features(img, config.matching())
    corr = correspondence_from_plane(scene.K, scene.gt_plane)
    hyp = config.hypotheses()
    build_cost_volume(feat, corr, hyp, config.matching())  # warm up
    t0 = time.perf_counter()
    for _ in range(args.repeats):
        build_cost_volume(feat, corr, hyp, config.matching())
    dt = time.perf_counter() - t0
    cells = feat.gray.size * hyp.count * args.repeats
    print(f"volume build: {cells / dt / 1e6:.1f} Mcells/s ({dt / args.repeats * 1e3:.1f} ms/volume)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="symstereo",
        description="Shape-from-symmetry: mirror-plane detection and reflective stereo depth.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", help="JSON run-config file")
        sp.add_argument("--workers", type=int, default=None, help="worker threads (0 = all cores; env SYMSTEREO_WORKERS)")
        sp.add_argument("--no-timings", action="store_true", help="omit timings from result files")

    sp = sub.add_parser("render", help="render a scene spec to image/depth/occlusion")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--width", type=int, default=256)
    sp.add_argument("--height", type=int, default=256)
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("detect", help="detect the mirror-plane normal")
    sp.add_argument("--image", required=True)
    sp.add_argument("--camera", required=True)
    sp.add_argument("--out", required=True)
    add_common(sp)
    sp.set_defaults(func=cmd_detect)

    sp = sub.add_parser("depth", help="estimate depth for a known plane")
    sp.add_argument("--image", required=True)
    sp.add_argument("--camera", required=True)
    sp.add_argument("--plane", required=True, help="JSON file with w (or w_hat)")
    sp.add_argument("--out", required=True)
    add_common(sp)
    sp.set_defaults(func=cmd_depth)

    sp = sub.add_parser("multi", help="fuse several symmetry transforms (needs R, t)")
    sp.add_argument("--image", required=True)
    sp.add_argument("--camera", required=True)
    sp.add_argument("--transforms", required=True, help="comma list, e.g. M2,M3")
    sp.add_argument("--out", required=True)
    add_common(sp)
    sp.set_defaults(func=cmd_multi)

    sp = sub.add_parser("eval", help="depth metrics between two PFM maps")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--gt", required=True)
    sp.add_argument("--mask", help="PNG mask, >127 = evaluate")
    sp.add_argument("--pred-plane")
    sp.add_argument("--gt-plane")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("curves", help="error-percentage curve CSV")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--gt", required=True)
    sp.add_argument("--mask")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_curves)

    sp = sub.add_parser("selfcheck", help="run the built-in invariant suite")
    sp.set_defaults(func=cmd_selfcheck)

    sp = sub.add_parser("bench", help="print cost-volume build throughput")
    sp.add_argument("--repeats", type=int, default=5)
    add_common(sp)
    sp.set_defaults(func=cmd_bench)

    return p


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code else 0
    try:
        return args.func(args)
    except (OSError, sio.FormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (SceneError, ConfigError, GeometryError, MatchingError, MetricsError, PipelineError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
