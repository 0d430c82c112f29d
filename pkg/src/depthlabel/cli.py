"""Command-line pipeline: accumulate, diff, label, export, eval, synth.

One entry point, batch-friendly: multi-scene subcommands keep going past
per-scene failures and report a summary. Exit codes: 0 success, 1 usage
error, 2 data error, 3 I/O error.
"""

import argparse
import dataclasses
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__, evaluate, pcd
from .accumulate import accumulate
from .change import ThresholdParams, change_mask
from .config import PipelineConfig, _parse_bool, build_config, load_config
from .export import (crop_instance, extract_instances, overlay, write_bbox_csv)
from .imgio import read_label_png, write_color_png, write_label_png, write_mask_png
from .labeling import ClusterParams, LabelTemplate, label_clouds
from .synth import load_spec, write_scene

USAGE_ERROR = 1
DATA_ERROR = 2
IO_ERROR = 3


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _add_config_flag(p):
    p.add_argument("--config", metavar="FILE",
                   help="key=value config file (defaults < file < flags)")


def _config_from(args, **flag_map) -> PipelineConfig:
    file_values = load_config(args.config) if getattr(args, "config", None) else {}
    flags = {key: getattr(args, attr, None) for key, attr in flag_map.items()}
    return build_config(file_values, flags)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="depthlabel",
                     description="Label incrementally built RGB-D scenes and "
                                 "score segmentation output against them.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("accumulate",
                       help="smooth one stage's frames into a single cloud")
    p.add_argument("--in", dest="in_dir", required=True, metavar="DIR",
                   help="directory of the stage's frame .pcd files")
    p.add_argument("--out", required=True, metavar="PCD")
    p.add_argument("--jump", type=float, metavar="M",
                   help="depth jump that resets the running mean")
    _add_config_flag(p)
    p.set_defaults(func=_cmd_accumulate)

    p = sub.add_parser("diff", help="depth-change mask between two clouds")
    p.add_argument("--prev", required=True, metavar="PCD")
    p.add_argument("--curr", required=True, metavar="PCD")
    p.add_argument("--out", required=True, metavar="PNG",
                   help="8-bit mask PNG; codes 0=unchanged 1=closer 2=farther "
                        "3=appeared 4=disappeared 5=both-invalid")
    p.add_argument("--c0", type=float, metavar="M")
    p.add_argument("--c1", type=float, metavar="M_PER_M2")
    _add_config_flag(p)
    p.set_defaults(func=_cmd_diff)

    p = sub.add_parser("label",
                       help="label one scene directory, or a root of scenes")
    p.add_argument("--scene", required=True, metavar="DIR",
                   help="scene directory of stage_*/ frame dirs, or a root "
                        "whose children are such scenes")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--merge", type=_parse_bool, metavar="on|off",
                   help="merge all of a stage's clusters into one id")
    p.add_argument("--c0", type=float, metavar="M")
    p.add_argument("--c1", type=float, metavar="M_PER_M2")
    p.add_argument("--link", type=float, metavar="M",
                   help="max 3D neighbor distance inside a cluster")
    p.add_argument("--min-pts", dest="min_pts", type=int, metavar="N",
                   help="minimum cluster size in pixels")
    p.add_argument("--jump", type=float, metavar="M")
    p.add_argument("--jobs", type=int, default=1, metavar="N",
                   help="process scenes in N parallel workers")
    _add_config_flag(p)
    p.set_defaults(func=_cmd_label)

    p = sub.add_parser("export",
                       help="bounding boxes, overlays, and crops from labels")
    p.add_argument("--labels", required=True, metavar="DIR",
                   help="directory of *_label.png templates")
    p.add_argument("--clouds", required=True, metavar="DIR",
                   help="directory of matching *_cloud.pcd files")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--bboxes", metavar="CSV", help="write a bounding-box CSV")
    p.add_argument("--crops", action="store_true",
                   help="write per-instance color crops")
    p.add_argument("--overlay", action="store_true",
                   help="write color overlays with the label palette")
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("eval", help="score predicted label images against gt")
    p.add_argument("--gt", required=True, metavar="DIR")
    p.add_argument("--pred", required=True, metavar="DIR")
    p.add_argument("--depth", required=True, metavar="DIR",
                   help="tree of *_cloud.pcd or *_depth.png for validity")
    p.add_argument("--meta", metavar="CSV",
                   help="factor tags per scene path (scene_id,clutter,shape,"
                        "plane,viewpoint)")
    p.add_argument("--out", required=True, metavar="CSV",
                   help="report CSV; counts go to <stem>_counts.csv")
    p.add_argument("--group-by", dest="group_by",
                   choices=evaluate.FACTORS,
                   help="also write <stem>_groups.csv of factor means")
    p.add_argument("--jobs", type=int, default=1, metavar="N")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="render a synthetic scene recording")
    p.add_argument("--spec", required=True, metavar="JSON",
                   help="scene spec config file")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--frames", type=int, metavar="N",
                   help="override frames_per_stage from the spec")
    p.add_argument("--seed", type=int, metavar="N",
                   help="override the spec's random seed")
    p.set_defaults(func=_cmd_synth)

    return parser


def _cmd_accumulate(args) -> int:
    cfg = _config_from(args, jump_threshold="jump")
    in_dir = Path(args.in_dir)
    paths = sorted(in_dir.glob("*.pcd"))
    if not paths:
        raise FileNotFoundError(f"no .pcd frames in {in_dir}")
    frames = [pcd.load_cloud(p) for p in paths]
    cloud = accumulate(frames, cfg.jump_threshold)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    pcd.save_cloud(cloud, out)
    return 0


def _cmd_diff(args) -> int:
    cfg = _config_from(args, c0="c0", c1="c1")
    prev = pcd.load_cloud(args.prev)
    curr = pcd.load_cloud(args.curr)
    mask = change_mask(prev, curr, ThresholdParams(cfg.c0, cfg.c1))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_mask_png(out, mask.flags)
    return 0


def _label_scene(scene_dir: str, out_dir: str, cfg: PipelineConfig):
    """Label one scene directory; returns (scene_name, error or None)."""
    scene = Path(scene_dir)
    try:
        stage_dirs = sorted(d for d in scene.glob("stage_*") if d.is_dir())
        if len(stage_dirs) < 2:
            raise FileNotFoundError(
                f"scene {scene} needs at least 2 stage_* directories")
        clouds = []
        for d in stage_dirs:
            paths = sorted(d.glob("*.pcd"))
            if not paths:
                raise FileNotFoundError(f"no .pcd frames in {d}")
            frames = [pcd.load_cloud(p) for p in paths]
            clouds.append(accumulate(frames, cfg.jump_threshold))
        templates = label_clouds(
            clouds, ThresholdParams(cfg.c0, cfg.c1),
            ClusterParams(cfg.link_distance, cfg.min_cluster_points),
            merge=cfg.merge)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for k, (cloud, template) in enumerate(zip(clouds, templates)):
            write_label_png(out / f"stage_{k:03d}_label.png", template.labels)
            pcd.save_cloud(cloud, out / f"stage_{k:03d}_cloud.pcd")
        return (scene.name, None)
    except (ValueError, OSError) as exc:
        return (scene.name, f"{type(exc).__name__}: {exc}")


def _cmd_label(args) -> int:
    cfg = _config_from(args, jump_threshold="jump", c0="c0", c1="c1",
                       link_distance="link", min_cluster_points="min_pts",
                       merge="merge")
    root = Path(args.scene)
    if not root.is_dir():
        raise FileNotFoundError(f"scene directory not found: {root}")
    if any(d.is_dir() for d in root.glob("stage_*")):
        scenes = [(str(root), str(args.out))]
    else:
        children = sorted(d for d in root.iterdir()
                          if d.is_dir() and any(
                              s.is_dir() for s in d.glob("stage_*")))
        if not children:
            raise FileNotFoundError(f"no stage_* directories under {root}")
        scenes = [(str(d), str(Path(args.out) / d.name)) for d in children]

    if args.jobs > 1 and len(scenes) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(_label_scene, *zip(*scenes),
                                     [cfg] * len(scenes)))
    else:
        outcomes = [_label_scene(s, o, cfg) for s, o in scenes]
    failures = [(name, msg) for name, msg in outcomes if msg is not None]
    for name, msg in failures:
        print(f"error: scene {name}: {msg}", file=sys.stderr)
    if failures:
        print(f"{len(failures)} of {len(scenes)} scenes failed", file=sys.stderr)
        return DATA_ERROR
    return 0


def _cmd_export(args) -> int:
    labels_dir = Path(args.labels)
    clouds_dir = Path(args.clouds)
    out = Path(args.out)
    label_paths = sorted(labels_dir.glob("*_label.png"))
    if not label_paths:
        raise FileNotFoundError(f"no *_label.png files in {labels_dir}")
    out.mkdir(parents=True, exist_ok=True)
    scene_id = labels_dir.resolve().name
    bbox_rows = []
    failures = []
    for lp in label_paths:
        stem = lp.name[: -len("_label.png")]
        try:
            template = LabelTemplate(read_label_png(lp), _stage_index(stem))
            records = extract_instances(template)
            bbox_rows.extend((scene_id, template.stage, rec) for rec in records)
            if args.crops or args.overlay:
                cloud = pcd.load_cloud(clouds_dir / f"{stem}_cloud.pcd")
                if args.overlay:
                    write_color_png(out / f"{stem}_overlay.png",
                                    overlay(template, cloud))
                if args.crops:
                    for rec in records:
                        write_color_png(
                            out / f"{stem}_crop_{rec.label_id:03d}.png",
                            crop_instance(template, cloud, rec.label_id))
        except (ValueError, OSError) as exc:
            failures.append((lp.name, f"{type(exc).__name__}: {exc}"))
    if args.bboxes:
        bbox_path = Path(args.bboxes)
        bbox_path.parent.mkdir(parents=True, exist_ok=True)
        write_bbox_csv(bbox_path, bbox_rows)
    for name, msg in failures:
        print(f"error: {name}: {msg}", file=sys.stderr)
    if failures:
        print(f"{len(failures)} of {len(label_paths)} templates failed",
              file=sys.stderr)
        return DATA_ERROR
    return 0


def _stage_index(stem: str) -> int:
    m = re.search(r"(\d+)$", stem)
    return int(m.group(1)) if m else 0


def _cmd_eval(args) -> int:
    meta = evaluate.read_meta_csv(args.meta) if args.meta else {}
    results, failures = evaluate.evaluate_tree(
        args.gt, args.pred, args.depth, meta=meta, jobs=args.jobs)
    if not results and not failures:
        raise FileNotFoundError(f"no *_label.png files under {args.gt}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    evaluate.write_report_csv(results, out)
    evaluate.write_counts_csv(results, out.with_name(f"{out.stem}_counts.csv"))
    if args.group_by:
        groups = evaluate.aggregate([(r.metrics, r.tags) for r in results],
                                    args.group_by)
        evaluate.write_groups_csv(groups,
                                  out.with_name(f"{out.stem}_groups.csv"))
    for scene_id, msg in failures:
        print(f"error: {scene_id}: {msg}", file=sys.stderr)
    if failures:
        print(f"{len(failures)} of {len(results) + len(failures)} units failed",
              file=sys.stderr)
        return DATA_ERROR
    return 0


def _cmd_synth(args) -> int:
    spec = load_spec(args.spec)
    if args.frames is not None:
        spec = dataclasses.replace(spec, frames_per_stage=args.frames)
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    write_scene(spec, args.out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IO_ERROR


if __name__ == "__main__":
    sys.exit(main())
