"""Regenerate the bundled miniature evaluation dataset and its golden CSVs.

Builds tests/data/mini_dataset: three scenes under two subset directories, two
viewpoints each, as gt/pred/depth trees plus meta.csv. The predictions carry
one deliberate defect per unit (shift, relabel, merge, split, drop+spurious)
so the golden report covers the interesting scoring paths. Run from the
repository root:

    python3 scripts/make_mini_dataset.py

The goldens pin byte-exact evaluator output; regenerate only when the report
format itself changes, and review the diff when you do.
"""

import shutil
import sys
from pathlib import Path

import numpy as np

from depthlabel.evaluate import (
    aggregate,
    evaluate_tree,
    read_meta_csv,
    write_counts_csv,
    write_groups_csv,
    write_report_csv,
)
from depthlabel.imgio import write_depth_png, write_label_png

ROOT = Path(__file__).resolve().parents[1] / "tests" / "data" / "mini_dataset"
H, W = 120, 160
BACKGROUND_MM = 1800

META = """\
scene_id,clutter,shape,plane,viewpoint
ARID20/seq01/top,free,cuboid,table,top
ARID20/seq01/bottom,free,cuboid,table,bottom
ARID20/seq02/top,touching,mixed,floor,top
ARID20/seq02/bottom,touching,mixed,floor,bottom
YCB10/seq03/top,stacked,curved,table,top
YCB10/seq03/bottom,stacked,curved,table,bottom
"""


def blank():
    labels = np.zeros((H, W), np.uint16)
    depth = np.full((H, W), BACKGROUND_MM, np.uint16)
    return labels, depth


def rect(labels, depth, rows, cols, lid, mm):
    labels[rows[0]:rows[1], cols[0]:cols[1]] = lid
    depth[rows[0]:rows[1], cols[0]:cols[1]] = mm


def disc(labels, depth, cy, cx, r, lid, mm):
    yy, xx = np.ogrid[:H, :W]
    inside = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    labels[inside] = lid
    depth[inside] = mm


def seq01_top():
    labels, depth = blank()
    rect(labels, depth, (20, 50), (30, 70), 1, 1500)
    rect(labels, depth, (60, 90), (90, 140), 2, 1400)
    disc(labels, depth, 40, 110, 12, 3, 1300)
    return labels, depth, labels.copy()          # prediction is perfect


def seq01_bottom():
    labels, depth = blank()
    rect(labels, depth, (25, 55), (30, 70), 1, 1500)
    rect(labels, depth, (65, 95), (90, 140), 2, 1400)
    disc(labels, depth, 45, 110, 12, 3, 1300)
    pred = np.roll(labels, (2, 3), axis=(0, 1))  # everything slightly offset
    return labels, depth, pred


def seq02_top():
    labels, depth = blank()
    rect(labels, depth, (40, 80), (20, 60), 1, 1500)
    rect(labels, depth, (40, 80), (60, 100), 2, 1450)
    depth[0:10, 0:12] = 0                        # dead sensor patch, ignored
    pred = labels.copy()
    pred[labels == 1] = 2                        # ids swapped, still perfect
    pred[labels == 2] = 1
    return labels, depth, pred


def seq02_bottom():
    labels, depth = blank()
    rect(labels, depth, (30, 60), (20, 55), 1, 1500)
    rect(labels, depth, (30, 60), (55, 90), 2, 1500)
    disc(labels, depth, 85, 120, 15, 3, 1350)
    pred = labels.copy()
    pred[labels == 2] = 1                        # two objects merged into one
    return labels, depth, pred


def seq03_top():
    labels, depth = blank()
    disc(labels, depth, 40, 50, 18, 1, 1400)
    disc(labels, depth, 80, 110, 16, 2, 1350)
    pred = labels.copy()
    pred[(labels == 1) & (np.arange(W)[None, :] >= 50)] = 9   # split in two
    return labels, depth, pred


def seq03_bottom():
    labels, depth = blank()
    rect(labels, depth, (20, 50), (20, 70), 1, 1500)
    disc(labels, depth, 80, 60, 14, 2, 1300)
    pred = labels.copy()
    pred[labels == 2] = 0                        # one object missed entirely
    pred[30:40, 120:150] = 7                     # plus a spurious segment
    return labels, depth, pred


UNITS = {
    "ARID20/seq01/top": seq01_top,
    "ARID20/seq01/bottom": seq01_bottom,
    "ARID20/seq02/top": seq02_top,
    "ARID20/seq02/bottom": seq02_bottom,
    "YCB10/seq03/top": seq03_top,
    "YCB10/seq03/bottom": seq03_bottom,
}


def main() -> int:
    if ROOT.exists():
        shutil.rmtree(ROOT)
    for unit, build in UNITS.items():
        labels, depth, pred = build()
        for tree, image in (("gt", labels), ("pred", pred)):
            path = ROOT / tree / f"{unit}_label.png"
            path.parent.mkdir(parents=True, exist_ok=True)
            write_label_png(path, image)
        path = ROOT / "depth" / f"{unit}_depth.png"
        path.parent.mkdir(parents=True, exist_ok=True)
        write_depth_png(path, depth)
    (ROOT / "meta.csv").write_text(META)

    meta = read_meta_csv(ROOT / "meta.csv")
    results, failures = evaluate_tree(ROOT / "gt", ROOT / "pred",
                                      ROOT / "depth", meta=meta)
    assert not failures, failures
    assert len(results) == len(UNITS)

    by_id = {r.scene_id: r.metrics for r in results}
    for unit in ("ARID20/seq01/top", "ARID20/seq02/top"):
        m = by_id[unit]
        assert m.iou == 1.0 and m.f == 1.0, (unit, m)
    assert by_id["YCB10/seq03/bottom"].matched == 1

    write_report_csv(results, ROOT / "golden_report.csv")
    write_counts_csv(results, ROOT / "golden_counts.csv")
    groups = aggregate([(r.metrics, r.tags) for r in results], "viewpoint")
    write_groups_csv(groups, ROOT / "golden_groups.csv")
    total = (ROOT / "golden_counts.csv").read_text().splitlines()[-1]
    assert total == "total,3,6,15", total
    print(f"wrote {len(UNITS)} units and goldens under {ROOT}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
