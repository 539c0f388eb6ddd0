"""Single-image shape-from-symmetry: mirror-plane detection and reflective
plane-sweep depth estimation, with a synthetic-scene oracle and metrics."""

from .config import RunConfig
from .geometry import (
    CameraIntrinsics,
    CameraPose,
    CorrespondenceMap,
    PixelDepth,
    SymmetryPlane,
    SymmetryTransform,
    angle_error,
    correspondence_from_plane,
    correspondence_general,
    intrinsics_embed,
    mirror_matrix,
    plane_in_camera,
    warp_pixel,
)
from .matching import (
    ConfidenceMap,
    CostVolume,
    DepthHypotheses,
    DepthMap,
    FeatureMap,
    MatchingConfig,
    ProbabilityVolume,
    aggregate_cost_volume,
    build_cost_volume,
    confidence_map,
    depth_hypotheses,
    extract_features,
    matching_cost,
    plane_score,
    soft_argmin_depth,
    volume_to_probability,
)
from .metrics import (
    CurveData,
    MetricsReport,
    depth_metrics,
    error_percentage_curve,
    l_dpt,
    rescale_depth,
)
from .pipeline import (
    DetectionResult,
    ReconstructionResult,
    detect_symmetry,
    estimate_depth,
    multi_symmetry_depth,
    reflective_consistency_filter,
)
from .sampling import (
    Direction,
    ScheduleConfig,
    SphericalCap,
    cap_contains,
    coarse_to_fine,
    fibonacci_cap,
)
from .scene import (
    RenderOutput,
    Scene,
    TextureSpec,
    TriangleMesh,
    emit_scene,
    make_symmetric_mesh,
    render,
    scene_from_spec,
)

__version__ = "0.1.0"
