"""Scoring of predicted segmentation label images against ground truth.

Pixels without valid depth are excluded, ground-truth and predicted
labels are matched one-to-one by maximum total overlap, and per-object
precision/recall/F-score/IoU are averaged unweighted so small objects
count as much as large ones. Metrics come in two flavors: with the
background segment included in the mean, and without (the _nb fields).

Unmatched ground-truth objects score zero and stay in the mean; a method
cannot raise its score by skipping hard objects.
"""

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import pcd
from .cloud import FactorTags, OrganizedCloud
from .imgio import read_depth_png, read_label_png
from .labeling import LabelTemplate

IGNORE_LABEL = 65535

REPORT_CSV_COLUMNS = ("scene_id", "p", "r", "f", "iou", "p_nb", "r_nb", "f_nb",
                      "iou_nb", "matched", "gt_objects", "pred_segments")
COUNTS_CSV_COLUMNS = ("subset", "scenes", "labels", "instances")
GROUPS_CSV_COLUMNS = ("group", "scenes", "p", "r", "f", "iou", "p_nb", "r_nb",
                      "f_nb", "iou_nb")
FACTORS = ("clutter", "shape", "plane", "viewpoint")


@dataclass(frozen=True)
class Assignment:
    """One-to-one label matching: (gt_id, pred_id, overlap_pixels) pairs."""

    pairs: tuple
    unmatched_gt: tuple
    unmatched_pred: tuple


@dataclass(frozen=True)
class EvalMetrics:
    """Scene-level segmentation scores.

    p/r/f/iou average over ground-truth objects plus the background
    segment; the _nb variants drop the background term. matched counts
    ground-truth objects (background excluded) that found a partner;
    gt_objects and pred_segments count nonzero ids with valid pixels.
    """

    p: float
    r: float
    f: float
    iou: float
    p_nb: float
    r_nb: float
    f_nb: float
    iou_nb: float
    matched: int
    gt_objects: int
    pred_segments: int


@dataclass(frozen=True)
class GroupSummary:
    """Unweighted mean of scene scores within one factor-value group."""

    scenes: int
    p: float
    r: float
    f: float
    iou: float
    p_nb: float
    r_nb: float
    f_nb: float
    iou_nb: float


@dataclass(frozen=True)
class SceneResult:
    """One evaluated label image in a dataset tree."""

    scene_id: str
    metrics: EvalMetrics
    tags: FactorTags


def filter_invalid(gt: LabelTemplate, depth: OrganizedCloud) -> LabelTemplate:
    """Replace labels without valid depth by the IGNORE sentinel."""
    if (gt.height, gt.width) != (depth.height, depth.width):
        raise ValueError(
            f"template {gt.width}x{gt.height} does not match depth "
            f"{depth.width}x{depth.height}")
    valid = depth.valid_mask & (depth.depth > 0)
    labels = gt.labels.copy()
    labels[~valid] = IGNORE_LABEL
    return LabelTemplate(labels, gt.stage)


def _overlap_matrix(gt_labels, pred_labels):
    """Pixel overlap counts between every gt and pred id, IGNORE excluded."""
    valid = (gt_labels != IGNORE_LABEL) & (pred_labels != IGNORE_LABEL)
    g = gt_labels[valid].astype(np.int64)
    p = pred_labels[valid].astype(np.int64)
    gt_ids = np.unique(g)
    pred_ids = np.unique(p)
    gidx = np.searchsorted(gt_ids, g)
    pidx = np.searchsorted(pred_ids, p)
    ov = np.bincount(gidx * len(pred_ids) + pidx,
                     minlength=len(gt_ids) * len(pred_ids))
    ov = ov.reshape(len(gt_ids), len(pred_ids)).astype(np.int64)
    return gt_ids, pred_ids, ov


def _lap_max(ov) -> int:
    if ov.size == 0:
        return 0
    rows, cols = linear_sum_assignment(ov, maximize=True)
    return int(ov[rows, cols].sum())


def _forbid(ov, g, p):
    masked = ov.copy()
    masked[g, p] = -(1 << 40)
    return masked


# Node budget for the tie search; only adversarial all-tied matrices can
# exhaust it, and the first path explored is already a complete matching.
_TIE_SEARCH_BUDGET = 50_000


def _canonical_pairs(ov, total):
    """Pick one maximum-total matching as (row, col) index pairs.

    The scores downstream depend only on each pair's overlap and the two
    segment sizes, so ties between maximum-total matchings are broken by
    the sorted multiset of (overlap, -gt_size, -pred_size) triples. That
    signature never mentions label ids, which keeps the metrics bitwise
    stable when gt or pred ids are renamed; the lowest (gt, pred) index
    sequence decides between matchings whose signatures agree.
    """
    if total == 0:
        return ()
    rows, cols = linear_sum_assignment(ov, maximize=True)
    positive = sorted((int(g), int(p)) for g, p in zip(rows, cols)
                      if ov[g, p] > 0)
    if all(_lap_max(_forbid(ov, g, p)) < total for g, p in positive):
        return tuple(positive)          # every pair forced: unique optimum

    ng = ov.shape[0]
    gsz = ov.sum(axis=1)
    psz = ov.sum(axis=0)
    state = {"budget": _TIE_SEARCH_BUDGET, "sig": None, "pairs": None}

    def consider(chosen):
        sig = tuple(sorted(((int(ov[g, p]), -int(gsz[g]), -int(psz[p]))
                            for g, p in chosen), reverse=True))
        if state["sig"] is None or sig > state["sig"] or \
                (sig == state["sig"] and chosen < state["pairs"]):
            state["sig"], state["pairs"] = sig, chosen

    def dfs(row, free, fixed, chosen):
        if state["budget"] <= 0:
            return
        state["budget"] -= 1
        if row == ng:
            if fixed == total:
                consider(chosen)
            return
        below = list(range(row + 1, ng))
        for k, j in enumerate(free):
            if ov[row, j] == 0:
                continue
            rest_free = free[:k] + free[k + 1:]
            attained = fixed + int(ov[row, j])
            if attained + _lap_max(ov[np.ix_(below, rest_free)]) == total:
                dfs(row + 1, rest_free, attained, chosen + ((row, j),))
        if fixed + _lap_max(ov[np.ix_(below, free)]) == total:
            dfs(row + 1, free, fixed, chosen)

    dfs(0, tuple(range(ov.shape[1])), 0, ())
    return state["pairs"]


def match_labels(gt: LabelTemplate, pred: LabelTemplate) -> Assignment:
    """Maximum-overlap one-to-one matching of gt and pred labels.

    Background (id 0) takes part like any other label and zero-overlap
    pairs are never formed. Ties between maximum-total matchings are
    resolved by an id-free signature of (overlap, sizes) triples so that
    renaming labels cannot change the resulting scores, then by the
    lowest (gt_id, pred_id) pairing.
    """
    if (gt.height, gt.width) != (pred.height, pred.width):
        raise ValueError(
            f"label dimensions differ: gt {gt.width}x{gt.height} vs "
            f"pred {pred.width}x{pred.height}")
    gt_ids, pred_ids, ov = _overlap_matrix(gt.labels, pred.labels)
    total = _lap_max(ov)
    pairs = [(int(gt_ids[g]), int(pred_ids[p]), int(ov[g, p]))
             for g, p in _canonical_pairs(ov, total)]
    matched_g = {g for g, _, _ in pairs}
    matched_p = {p for _, p, _ in pairs}
    return Assignment(
        pairs=tuple(pairs),
        unmatched_gt=tuple(int(v) for v in gt_ids if int(v) not in matched_g),
        unmatched_pred=tuple(int(v) for v in pred_ids if int(v) not in matched_p),
    )


def _pair_scores(overlap: int, gt_size: int, pred_size: int):
    p = overlap / pred_size
    r = overlap / gt_size
    f = 2.0 * p * r / (p + r) if p + r > 0 else 0.0
    iou = overlap / (gt_size + pred_size - overlap)
    return p, r, f, iou


def compute_metrics(gt: LabelTemplate, pred: LabelTemplate,
                    a: Assignment) -> EvalMetrics:
    """Score one scene given its label matching.

    Per matched pair: p = overlap/|pred|, r = overlap/|gt|, f = 2pr/(p+r),
    iou = overlap/|union|. Unmatched gt objects contribute zeros; extra
    pred segments only raise pred_segments. Means are unweighted over gt
    objects, plus the background segment for the non-nb variants.
    """
    gt_ids, pred_ids, ov = _overlap_matrix(gt.labels, pred.labels)
    gt_size = {int(g): int(s) for g, s in zip(gt_ids, ov.sum(axis=1))}
    pred_size = {int(p): int(s) for p, s in zip(pred_ids, ov.sum(axis=0))}
    gset = set(gt_size)
    pset = set(pred_size)

    seen_g, seen_p = set(), set()
    by_gt = {}
    for g, p, overlap in a.pairs:
        if g not in gset or p not in pset or g in seen_g or p in seen_p:
            raise ValueError("assignment does not belong to this template pair")
        gi = int(np.searchsorted(gt_ids, g))
        pi = int(np.searchsorted(pred_ids, p))
        if int(ov[gi, pi]) != overlap or overlap < 1:
            raise ValueError("assignment does not belong to this template pair")
        seen_g.add(g)
        seen_p.add(p)
        by_gt[g] = _pair_scores(overlap, gt_size[g], pred_size[p])
    if seen_g | set(a.unmatched_gt) != gset or seen_p | set(a.unmatched_pred) != pset:
        raise ValueError("assignment does not belong to this template pair")

    zeros = (0.0, 0.0, 0.0, 0.0)
    object_ids = [g for g in sorted(gt_size) if g != 0]
    obj_scores = [by_gt.get(g, zeros) for g in object_ids]
    all_scores = list(obj_scores)
    if 0 in gt_size:
        all_scores.append(by_gt.get(0, zeros))

    def mean(scores, idx):
        if not scores:
            return 0.0
        return math.fsum(s[idx] for s in scores) / len(scores)

    return EvalMetrics(
        p=mean(all_scores, 0), r=mean(all_scores, 1),
        f=mean(all_scores, 2), iou=mean(all_scores, 3),
        p_nb=mean(obj_scores, 0), r_nb=mean(obj_scores, 1),
        f_nb=mean(obj_scores, 2), iou_nb=mean(obj_scores, 3),
        matched=sum(1 for g in by_gt if g != 0),
        gt_objects=len(object_ids),
        pred_segments=sum(1 for p in pred_size if p != 0),
    )


def evaluate_pair(gt: LabelTemplate, pred: LabelTemplate,
                  depth: OrganizedCloud | None = None) -> EvalMetrics:
    """Filter, match, and score one gt/pred pair in one call."""
    if depth is not None:
        gt = filter_invalid(gt, depth)
    return compute_metrics(gt, pred, match_labels(gt, pred))


def aggregate(results, factor: str) -> dict:
    """Unweighted mean of scene scores per value of one factor tag.

    ``results`` is a list of (EvalMetrics, FactorTags); ``factor`` is one
    of clutter, shape, plane, viewpoint. Empty groups do not appear.
    """
    if factor not in FACTORS:
        raise ValueError(f"unknown factor {factor!r}; choose from {FACTORS}")
    results = list(results)
    if not results:
        raise ValueError("aggregate needs at least one result")
    groups: dict[str, list] = {}
    for metrics, tags in results:
        key = getattr(tags, factor).value
        groups.setdefault(key, []).append(metrics)
    out = {}
    for key in sorted(groups):
        ms = groups[key]
        n = len(ms)
        vals = [math.fsum(getattr(m, fld) for m in ms) / n
                for fld in ("p", "r", "f", "iou", "p_nb", "r_nb", "f_nb", "iou_nb")]
        out[key] = GroupSummary(n, *vals)
    return out


# ---------------------------------------------------------------------------
# Dataset tree walking (subset/scene/viewpoint directories of label images)

_LABEL_SUFFIX = "_label.png"


@dataclass(frozen=True)
class EvalUnit:
    """Paths for one label image in a dataset tree."""

    scene_id: str
    gt_path: str
    pred_path: str
    depth_path: str


def scan_layout(gt_root, pred_root, depth_root) -> list[EvalUnit]:
    """Pair every gt label image with its prediction and depth source.

    Ground-truth files match ``*_label.png`` anywhere under gt_root; the
    prediction must sit at the same relative path under pred_root, and the
    depth source next to it under depth_root as either ``<stem>_cloud.pcd``
    or ``<stem>_depth.png``. The scene_id is the relative path without the
    label suffix.
    """
    gt_root, pred_root, depth_root = Path(gt_root), Path(pred_root), Path(depth_root)
    if not gt_root.is_dir():
        raise FileNotFoundError(f"ground-truth directory not found: {gt_root}")
    units = []
    for gt_path in sorted(gt_root.rglob(f"*{_LABEL_SUFFIX}")):
        rel = gt_path.relative_to(gt_root)
        stem = rel.name[:-len(_LABEL_SUFFIX)]
        scene_id = (rel.parent / stem).as_posix()
        pred_path = pred_root / rel
        depth_dir = depth_root / rel.parent
        depth_path = depth_dir / f"{stem}_cloud.pcd"
        if not depth_path.exists():
            depth_path = depth_dir / f"{stem}_depth.png"
        units.append(EvalUnit(scene_id, str(gt_path), str(pred_path),
                              str(depth_path)))
    return units


def _depth_from_png(path) -> OrganizedCloud:
    depth_mm = read_depth_png(path)
    z = depth_mm.astype(np.float64) / 1000.0
    z[depth_mm == 0] = np.nan
    pts = np.zeros(z.shape + (3,), dtype=np.float64)
    pts[:, :, 2] = z
    return OrganizedCloud(pts)


def _load_depth(path: str) -> OrganizedCloud:
    if path.endswith(".pcd"):
        return pcd.load_cloud(path)
    return _depth_from_png(path)


def _eval_unit(unit: EvalUnit):
    """Worker for one unit; returns ("ok", result) or ("err", message)."""
    try:
        gt_labels = read_label_png(unit.gt_path)
        if not Path(unit.pred_path).exists():
            raise FileNotFoundError(f"prediction not found: {unit.pred_path}")
        pred_labels = read_label_png(unit.pred_path)
        if gt_labels.shape != pred_labels.shape:
            raise ValueError(
                f"label dimensions differ: {unit.gt_path} is "
                f"{gt_labels.shape[1]}x{gt_labels.shape[0]}, {unit.pred_path} "
                f"is {pred_labels.shape[1]}x{pred_labels.shape[0]}")
        if not Path(unit.depth_path).exists():
            raise FileNotFoundError(f"depth source not found: {unit.depth_path}")
        depth = _load_depth(unit.depth_path)
        if (depth.height, depth.width) != gt_labels.shape:
            raise ValueError(
                f"depth dimensions differ: {unit.gt_path} is "
                f"{gt_labels.shape[1]}x{gt_labels.shape[0]}, {unit.depth_path} "
                f"is {depth.width}x{depth.height}")
        gt = filter_invalid(LabelTemplate(gt_labels, 0), depth)
        pred = LabelTemplate(pred_labels, 0)
        metrics = compute_metrics(gt, pred, match_labels(gt, pred))
        return ("ok", metrics)
    except (ValueError, OSError) as exc:
        return ("err", f"{type(exc).__name__}: {exc}")


def read_meta_csv(path) -> dict[str, FactorTags]:
    """Load factor tags keyed by scene path prefix.

    Columns: scene_id, clutter, shape, plane, viewpoint. A row tags every
    unit whose scene_id starts with the row's scene_id path.
    """
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"scene_id", "clutter", "shape", "plane", "viewpoint"}
        got = set(reader.fieldnames or [])
        if got != expected:
            raise ValueError(
                f"meta CSV columns {sorted(got)} do not match "
                f"{sorted(expected)} in {path}")
        for row in reader:
            out[row["scene_id"]] = FactorTags.from_strings(
                clutter=row["clutter"], shape=row["shape"],
                plane=row["plane"], viewpoint=row["viewpoint"])
    return out


def _tags_for(scene_id: str, meta: dict[str, FactorTags]) -> FactorTags:
    parts = scene_id.split("/")
    for depth_ in range(len(parts) - 1, 0, -1):
        key = "/".join(parts[:depth_])
        if key in meta:
            return meta[key]
    return meta.get(scene_id, FactorTags.from_strings())


def evaluate_tree(gt_root, pred_root, depth_root, meta=None, jobs: int = 1):
    """Evaluate every label image in a subset/scene dataset tree.

    Returns (results, failures): SceneResult entries sorted by scene_id,
    and (scene_id, message) for units that could not be scored. ``jobs``
    > 1 spreads units over worker processes; results are identical to a
    serial run.
    """
    meta = meta or {}
    units = scan_layout(gt_root, pred_root, depth_root)
    if jobs > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_eval_unit, units))
    else:
        outcomes = [_eval_unit(u) for u in units]
    results, failures = [], []
    for unit, (status, payload) in zip(units, outcomes):
        if status == "ok":
            results.append(SceneResult(unit.scene_id, payload,
                                       _tags_for(unit.scene_id, meta)))
        else:
            failures.append((unit.scene_id, payload))
    return results, failures


def _scene_key(scene_id: str) -> tuple[str, str]:
    """(subset, scene) grouping keys for a unit's scene_id path."""
    parts = scene_id.split("/")
    if len(parts) >= 2:
        return parts[0], f"{parts[0]}/{parts[1]}"
    return ("all", scene_id)


def write_report_csv(results, path) -> None:
    """Per-unit scores, 3 decimal places, sorted by scene_id."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_CSV_COLUMNS)
        for res in sorted(results, key=lambda r: r.scene_id):
            m = res.metrics
            w.writerow([res.scene_id,
                        f"{m.p:.3f}", f"{m.r:.3f}", f"{m.f:.3f}", f"{m.iou:.3f}",
                        f"{m.p_nb:.3f}", f"{m.r_nb:.3f}", f"{m.f_nb:.3f}",
                        f"{m.iou_nb:.3f}",
                        m.matched, m.gt_objects, m.pred_segments])


def write_counts_csv(results, path) -> None:
    """Dataset size summary per subset: scenes, label images, instances."""
    scenes: dict[str, set] = {}
    labels: dict[str, int] = {}
    instances: dict[str, int] = {}
    for res in results:
        subset, scene = _scene_key(res.scene_id)
        scenes.setdefault(subset, set()).add(scene)
        labels[subset] = labels.get(subset, 0) + 1
        instances[subset] = instances.get(subset, 0) + res.metrics.gt_objects
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COUNTS_CSV_COLUMNS)
        for subset in sorted(scenes):
            w.writerow([subset, len(scenes[subset]), labels[subset],
                        instances[subset]])
        w.writerow(["total", sum(len(s) for s in scenes.values()),
                    sum(labels.values()), sum(instances.values())])


def write_groups_csv(groups: dict, path) -> None:
    """Factor-group means, 3 decimal places, sorted by group value."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GROUPS_CSV_COLUMNS)
        for key in sorted(groups):
            g = groups[key]
            w.writerow([key, g.scenes,
                        f"{g.p:.3f}", f"{g.r:.3f}", f"{g.f:.3f}", f"{g.iou:.3f}",
                        f"{g.p_nb:.3f}", f"{g.r_nb:.3f}", f"{g.f_nb:.3f}",
                        f"{g.iou_nb:.3f}"])
