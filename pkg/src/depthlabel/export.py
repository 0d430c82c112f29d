"""Ground-truth products derived from label templates.

Turns per-pixel instance ids into the things training pipelines consume:
bounding boxes, per-instance crops, color overlays, and a bbox CSV.
"""

import colorsys
import csv
from dataclasses import dataclass

import numpy as np

from .cloud import OrganizedCloud
from .labeling import LabelTemplate

_GOLDEN = 0.6180339887498949

BBOX_CSV_COLUMNS = ("scene_id", "stage", "label_id", "row_min", "col_min",
                    "row_max", "col_max", "pixel_count")


@dataclass(frozen=True)
class InstanceRecord:
    """One labeled object instance in a template.

    ``bbox`` is (row_min, col_min, row_max, col_max), inclusive.
    ``stage_added`` equals label_id under the one-object-per-stage
    protocol, where id k is the object placed at stage k.
    """

    label_id: int
    stage_added: int
    pixel_count: int
    bbox: tuple[int, int, int, int]


def extract_instances(t: LabelTemplate) -> list[InstanceRecord]:
    """One record per nonzero id present, ascending by id, tight bboxes."""
    out = []
    for lid in t.ids():
        rows, cols = np.nonzero(t.labels == lid)
        out.append(InstanceRecord(
            label_id=lid,
            stage_added=lid,
            pixel_count=int(rows.size),
            bbox=(int(rows.min()), int(cols.min()), int(rows.max()), int(cols.max())),
        ))
    return out


def label_color(label_id: int) -> tuple[int, int, int]:
    """Deterministic palette color for an instance id (id >= 1)."""
    if label_id < 1:
        raise ValueError(f"palette covers ids >= 1, got {label_id}")
    hue = (label_id * _GOLDEN) % 1.0
    r, g, b = colorsys.hsv_to_rgb(hue, 0.75, 1.0)
    return (int(round(r * 255)), int(round(g * 255)), int(round(b * 255)))


def overlay(t: LabelTemplate, cloud: OrganizedCloud) -> np.ndarray:
    """Paint instances in palette colors over the dimmed original image.

    Background (id 0) shows the input color at half intensity. Returns an
    (h, w, 3) uint8 image.
    """
    if cloud.color is None:
        raise ValueError("cloud has no color channel")
    if (cloud.height, cloud.width) != (t.height, t.width):
        raise ValueError(
            f"cloud {cloud.width}x{cloud.height} does not match template "
            f"{t.width}x{t.height}")
    out = (cloud.color // 2).astype(np.uint8)
    for lid in t.ids():
        out[t.labels == lid] = label_color(lid)
    return out


def crop_instance(t: LabelTemplate, cloud: OrganizedCloud, label_id: int,
                  pad: int = 0) -> np.ndarray:
    """Color crop of one instance's bbox, expanded by pad and clipped."""
    if cloud.color is None:
        raise ValueError("cloud has no color channel")
    if pad < 0:
        raise ValueError(f"pad must be >= 0, got {pad}")
    rows, cols = np.nonzero(t.labels == label_id)
    if rows.size == 0:
        raise ValueError(f"label id {label_id} not present in template")
    r0 = max(int(rows.min()) - pad, 0)
    c0 = max(int(cols.min()) - pad, 0)
    r1 = min(int(rows.max()) + pad, t.height - 1)
    c1 = min(int(cols.max()) + pad, t.width - 1)
    return cloud.color[r0:r1 + 1, c0:c1 + 1].copy()


def write_bbox_csv(path, rows) -> None:
    """Write (scene_id, stage, InstanceRecord) triples as a bbox CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BBOX_CSV_COLUMNS)
        for scene_id, stage, rec in rows:
            w.writerow([scene_id, stage, rec.label_id, rec.bbox[0], rec.bbox[1],
                        rec.bbox[2], rec.bbox[3], rec.pixel_count])
