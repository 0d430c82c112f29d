"""Per-stage instance labeling of an incrementally built scene.

Each stage adds geometry in front of the previous accumulated cloud.
Pixels flagged as new surface (changed closer or appeared) are clustered
by 3D distance on the pixel grid, and surviving clusters stamp the next
template on top of the propagated prior labels: the newest object wins
wherever it now occludes an older one.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .accumulate import DEFAULT_JUMP_M, accumulate
from .change import ChangeFlag, ChangeMask, ThresholdParams, change_mask
from .cloud import OrganizedCloud, SceneMeta

MAX_LABEL_ID = 65534  # 65535 is the evaluator's ignore sentinel


class EmptyStageWarning(UserWarning):
    """A stage produced no surviving cluster; its template repeats the prior one."""


class RemovalWarning(UserWarning):
    """A stage lost a significant surface patch; objects should only be added."""


class LabelTemplate:
    """Per-pixel instance ids for one stage.

    ``labels`` is a uint16 grid: 0 is background, k >= 1 an object
    instance. Under the one-object-per-stage protocol (merge mode) id k is
    the object placed at stage k, so every nonzero id is <= stage; with
    merging off a stage may mint several ids beyond its own index.
    """

    __slots__ = ("labels", "stage")

    def __init__(self, labels: np.ndarray, stage: int):
        labels = np.ascontiguousarray(labels)
        if labels.ndim != 2:
            raise ValueError(f"labels must be 2D, got shape {labels.shape}")
        if labels.dtype != np.uint16:
            raise ValueError(f"labels must be uint16, got {labels.dtype}")
        if stage < 0:
            raise ValueError(f"stage must be >= 0, got {stage}")
        self.labels = labels
        self.stage = int(stage)

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    def ids(self) -> list[int]:
        """Nonzero instance ids present, ascending."""
        vals = np.unique(self.labels)
        return [int(v) for v in vals if v != 0]

    @classmethod
    def empty(cls, height: int, width: int, stage: int = 0) -> "LabelTemplate":
        return cls(np.zeros((height, width), dtype=np.uint16), stage)


@dataclass(frozen=True)
class ClusterParams:
    """Distance clustering knobs for grouping changed pixels."""

    link_distance: float = 0.02
    min_cluster_points: int = 200
    connectivity: int = 8

    def __post_init__(self):
        if self.link_distance <= 0:
            raise ValueError(f"link_distance must be > 0, got {self.link_distance}")
        if self.min_cluster_points < 1:
            raise ValueError(
                f"min_cluster_points must be >= 1, got {self.min_cluster_points}")
        if self.connectivity not in (4, 8):
            raise ValueError(f"connectivity must be 4 or 8, got {self.connectivity}")


@dataclass
class Stage:
    """One build-up step: raw frames plus the processed products."""

    frames: list = field(default_factory=list)
    cloud: OrganizedCloud | None = None
    template: LabelTemplate | None = None


@dataclass
class SceneSequence:
    """Ordered stages of one recorded scene; stage 0 is the empty scene."""

    meta: SceneMeta
    stages: list = field(default_factory=list)


def cluster_changed(cloud: OrganizedCloud, mask: ChangeMask,
                    params: ClusterParams) -> list[np.ndarray]:
    """Group new-surface pixels into spatially coherent clusters.

    Considers pixels flagged changed_closer or appeared. Grid-adjacent
    pixels join one cluster when their 3D points lie within link_distance.
    Clusters below min_cluster_points are dropped. Returns (n, 2) arrays
    of (row, col) in row-major order, sorted by size descending, ties by
    smallest first pixel.
    """
    if (cloud.height, cloud.width) != (mask.height, mask.width):
        raise ValueError(
            f"cloud {cloud.width}x{cloud.height} does not match mask "
            f"{mask.width}x{mask.height}")
    seeds = (mask.flags == ChangeFlag.CHANGED_CLOSER) | \
            (mask.flags == ChangeFlag.APPEARED)
    if not seeds.any():
        return []
    comp = kernels.grid_components(cloud.points, seeds, params.link_distance,
                                   params.connectivity)
    ncomp = int(comp.max()) + 1
    sizes = np.bincount(comp[comp >= 0].ravel(), minlength=ncomp)
    # component ids are already ordered by row-major first pixel
    order = sorted(range(ncomp), key=lambda c: (-int(sizes[c]), c))
    rows, cols = np.nonzero(comp >= 0)
    ids = comp[rows, cols]
    out = []
    for cid in order:
        if sizes[cid] < params.min_cluster_points:
            continue
        sel = ids == cid
        out.append(np.column_stack([rows[sel], cols[sel]]).astype(np.int32))
    return out


def update_template(prev: LabelTemplate, clusters: list[np.ndarray], stage: int,
                    merge: bool = True) -> LabelTemplate:
    """Stamp the new stage's clusters onto the propagated prior labels.

    With merge on (one object per stage) every cluster pixel gets label =
    stage; with merge off the i-th cluster gets a fresh id after the
    previous maximum. All other pixels keep their prior label.
    """
    if stage != prev.stage + 1:
        raise ValueError(f"stage must be {prev.stage + 1}, got {stage}")
    labels = prev.labels.copy()
    painted = np.zeros(labels.shape, dtype=bool)
    base = int(prev.labels.max())
    for i, px in enumerate(clusters):
        px = np.asarray(px)
        if px.ndim != 2 or px.shape[1] != 2:
            raise ValueError("each cluster must be an (n, 2) array of (row, col)")
        r, c = px[:, 0], px[:, 1]
        if painted[r, c].any():
            raise ValueError("clusters overlap")
        painted[r, c] = True
        new_id = stage if merge else base + 1 + i
        if new_id > MAX_LABEL_ID:
            raise ValueError(f"instance id {new_id} exceeds {MAX_LABEL_ID}")
        labels[r, c] = new_id
    return LabelTemplate(labels, stage)


def label_clouds(clouds, tparams: ThresholdParams | None = None,
                 cparams: ClusterParams | None = None,
                 merge: bool = True) -> list[LabelTemplate]:
    """Label an ordered list of accumulated stage clouds.

    Stage 0 becomes the all-background template. Each later stage is
    diffed against its predecessor; new-surface clusters stamp the next
    template. A stage with no surviving cluster repeats the prior labels
    with a warning; a large changed_farther patch (an apparent removal)
    warns but never labels.
    """
    tparams = tparams or ThresholdParams()
    cparams = cparams or ClusterParams()
    clouds = list(clouds)
    if len(clouds) < 2:
        raise ValueError(f"sequence needs at least 2 stages, got {len(clouds)}")
    for k, cloud in enumerate(clouds):
        if not cloud.valid_mask.any():
            raise ValueError(f"stage {k} accumulated to an all-invalid cloud")

    templates = [LabelTemplate.empty(clouds[0].height, clouds[0].width, stage=0)]
    for k in range(1, len(clouds)):
        mask = change_mask(clouds[k - 1], clouds[k], tparams)
        removed = mask.count(ChangeFlag.CHANGED_FARTHER)
        if removed >= cparams.min_cluster_points:
            warnings.warn(
                f"stage {k}: {removed} pixels moved farther; objects should "
                "only be added", RemovalWarning, stacklevel=2)
        clusters = cluster_changed(clouds[k], mask, cparams)
        if not clusters:
            warnings.warn(f"stage {k} added no cluster; repeating prior labels",
                          EmptyStageWarning, stacklevel=2)
            templates.append(LabelTemplate(templates[-1].labels.copy(), k))
        else:
            templates.append(update_template(templates[-1], clusters, k,
                                             merge=merge))
    return templates


def label_sequence(seq: SceneSequence, tparams: ThresholdParams | None = None,
                   cparams: ClusterParams | None = None,
                   jump: float = DEFAULT_JUMP_M,
                   merge: bool = True) -> SceneSequence:
    """Accumulate every stage and label the sequence from stage 0 upward.

    Fills in each stage's accumulated cloud and template; see
    :func:`label_clouds` for the labeling rules.
    """
    if len(seq.stages) < 2:
        raise ValueError(f"sequence needs at least 2 stages, got {len(seq.stages)}")
    for k, st in enumerate(seq.stages):
        if not st.frames:
            raise ValueError(f"stage {k} has no frames")
    for st in seq.stages:
        st.cloud = accumulate(st.frames, jump)
    templates = label_clouds([st.cloud for st in seq.stages], tparams, cparams,
                             merge=merge)
    for st, template in zip(seq.stages, templates):
        st.template = template
    return seq
