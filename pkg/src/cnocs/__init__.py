"""cnocs: multi-object 9-DoF pose conditioning toolkit.

Turns oriented-cuboid scene descriptions into CNOCS conditioning maps,
evaluates pose-fidelity rewards and metrics, runs disentangled object
sampling over abstract velocity fields, fits pose annotations from point
clouds, and serves it all over HTTP and a CLI.
"""

from .scene import (
    Camera,
    OrientedBox,
    Rect,
    Rotation,
    Scene,
    compose,
    project_box_to_rect,
    project_point,
    transform_c2o,
    transform_o2c,
)
from .render import (
    CnocsMap,
    EncodingSpec,
    Variant,
    downsample_mask,
    encode,
    intersect_ray_box,
    normalize_object_point,
    object_mask,
    render_cnocs,
    resolve_occlusion,
)
from .reward import PoseReward, iou, kl_divergence, reward, target_distribution
from .metrics import EvalCase, MetricSummary, eval_metrics
from .flow import (
    DosConfig,
    LatentState,
    coarse_estimate,
    dos_sample,
    euler_step,
    sample_truncation_window,
    truncated_run,
)
from .annotate import AnnotationCandidate, PointCloud, annotate, filter_candidates, fit_obb, trim_points

__version__ = "0.1.0"
