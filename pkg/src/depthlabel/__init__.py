"""Pixel-wise instance ground truth for incrementally built RGB-D scenes.

Recordings add one object per stage; temporal smoothing, depth-change
detection, and distance clustering turn the stages into per-pixel label
templates. An evaluation harness scores predicted segmentations against
such templates with Hungarian overlap matching and unweighted per-object
metrics.
"""

__version__ = "0.1.0"

from .accumulate import (AccumulatorState, DEFAULT_JUMP_M,
                         ShortRecordingWarning, accumulate,
                         default_frame_count)
from .change import (ChangeFlag, ChangeMask, ThresholdParams, change_mask,
                     threshold_at)
from .cloud import (CameraIntrinsics, FactorTags, OrganizedCloud, SceneMeta,
                    cloud_from_depth, ray_tangents)
from .evaluate import (Assignment, EvalMetrics, IGNORE_LABEL, aggregate,
                       compute_metrics, evaluate_pair, evaluate_tree,
                       filter_invalid, match_labels)
from .export import (InstanceRecord, crop_instance, extract_instances,
                     label_color, overlay)
from .labeling import (ClusterParams, EmptyStageWarning, LabelTemplate,
                       RemovalWarning, SceneSequence, Stage, cluster_changed,
                       label_clouds, label_sequence, update_template)
from .pcd import PCDFormatError, load_cloud, save_cloud
from .synth import (Box, PlaneModel, SceneSpec, Sphere, load_spec,
                    render_stage, true_depth, true_template, write_scene)

__all__ = [
    "__version__",
    "AccumulatorState", "DEFAULT_JUMP_M", "ShortRecordingWarning",
    "accumulate", "default_frame_count",
    "ChangeFlag", "ChangeMask", "ThresholdParams", "change_mask",
    "threshold_at",
    "CameraIntrinsics", "FactorTags", "OrganizedCloud", "SceneMeta",
    "cloud_from_depth", "ray_tangents",
    "Assignment", "EvalMetrics", "IGNORE_LABEL", "aggregate",
    "compute_metrics", "evaluate_pair", "evaluate_tree", "filter_invalid",
    "match_labels",
    "InstanceRecord", "crop_instance", "extract_instances", "label_color",
    "overlay",
    "ClusterParams", "EmptyStageWarning", "LabelTemplate", "RemovalWarning",
    "SceneSequence", "Stage", "cluster_changed", "label_clouds",
    "label_sequence", "update_template",
    "PCDFormatError", "load_cloud", "save_cloud",
    "Box", "PlaneModel", "SceneSpec", "Sphere", "load_spec", "render_stage",
    "true_depth", "true_template", "write_scene",
]
