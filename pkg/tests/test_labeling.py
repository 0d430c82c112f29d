"""Cluster extraction and incremental template labeling tests."""

import numpy as np
import pytest

from depthlabel import (
    ChangeFlag,
    ChangeMask,
    ClusterParams,
    EmptyStageWarning,
    LabelTemplate,
    RemovalWarning,
    SceneSequence,
    Stage,
    ThresholdParams,
    cluster_changed,
    label_clouds,
    label_sequence,
    update_template,
)
from depthlabel.cloud import SceneMeta
from depthlabel.labeling import MAX_LABEL_ID

from helpers import cloud_from_z, quiet


def flat_cloud(h=6, w=10, z=1.0, x_step=0.01):
    pts = np.zeros((h, w, 3))
    pts[:, :, 0] = np.arange(w) * x_step
    pts[:, :, 1] = np.arange(h)[:, None] * x_step
    pts[:, :, 2] = z
    from depthlabel import OrganizedCloud
    return OrganizedCloud(pts)


def mask_with(h, w, appeared):
    flags = np.zeros((h, w), dtype=np.uint8)
    for r, c in appeared:
        flags[r, c] = int(ChangeFlag.APPEARED)
    return ChangeMask(flags)


class TestClusterChanged:
    def test_two_distant_blobs_make_two_clusters(self):
        # left and right halves sit 0.5 m apart in x
        cloud = flat_cloud(h=4, w=10)
        cloud.points[:, 5:, 0] += 0.5
        mask = mask_with(4, 10, [(r, c) for r in range(4) for c in range(10)])
        clusters = cluster_changed(cloud, mask, ClusterParams(
            link_distance=0.05, min_cluster_points=1))
        assert len(clusters) == 2
        left = {(r, c) for r, c in map(tuple, clusters[0])}
        assert left == {(r, c) for r in range(4) for c in range(5)}

    def test_empty_mask_yields_no_clusters(self):
        cloud = flat_cloud()
        mask = mask_with(6, 10, [])
        assert cluster_changed(cloud, mask, ClusterParams()) == []

    def test_small_blob_filtered_by_size_gate(self):
        cloud = flat_cloud()
        blob = [(r, c) for r in range(5) for c in range(6)]  # 30 pixels
        mask = mask_with(6, 10, blob)
        params = ClusterParams(link_distance=0.05, min_cluster_points=50)
        assert cluster_changed(cloud, mask, params) == []
        params = ClusterParams(link_distance=0.05, min_cluster_points=30)
        assert len(cluster_changed(cloud, mask, params)) == 1

    def test_clusters_sorted_by_size_then_discovery(self):
        cloud = flat_cloud(h=4, w=12)
        cloud.points[:, 6:, 0] += 0.5
        # small blob first in scan order, big blob second
        small = [(0, c) for c in range(3)]
        big = [(r, c) for r in range(4) for c in range(6, 12)]
        mask = mask_with(4, 12, small + big)
        clusters = cluster_changed(cloud, mask, ClusterParams(
            link_distance=0.05, min_cluster_points=1))
        assert [len(c) for c in clusters] == [24, 3]

    def test_changed_closer_pixels_are_seeds_too(self):
        cloud = flat_cloud(h=2, w=4)
        flags = np.full((2, 4), int(ChangeFlag.CHANGED_CLOSER), dtype=np.uint8)
        clusters = cluster_changed(cloud, ChangeMask(flags), ClusterParams(
            link_distance=0.05, min_cluster_points=1))
        assert len(clusters) == 1 and len(clusters[0]) == 8

    def test_farther_and_invalid_pixels_are_not_seeds(self):
        cloud = flat_cloud(h=2, w=4)
        flags = np.array([[2, 4, 5, 0]] * 2, dtype=np.uint8)
        assert cluster_changed(cloud, ChangeMask(flags), ClusterParams(
            link_distance=0.05, min_cluster_points=1)) == []

    def test_pixels_listed_row_major(self):
        cloud = flat_cloud(h=3, w=3)
        mask = mask_with(3, 3, [(2, 2), (0, 0), (1, 1), (0, 1), (1, 0)])
        clusters = cluster_changed(cloud, mask, ClusterParams(
            link_distance=0.05, min_cluster_points=1))
        px = clusters[0]
        flat = px[:, 0] * 3 + px[:, 1]
        assert np.array_equal(flat, np.sort(flat))

    def test_grid_mismatch_rejected(self):
        with pytest.raises(ValueError, match="does not match mask"):
            cluster_changed(flat_cloud(h=3, w=3), mask_with(4, 4, []),
                            ClusterParams())

    def test_params_validation(self):
        with pytest.raises(ValueError, match="link_distance"):
            ClusterParams(link_distance=0.0)
        with pytest.raises(ValueError, match="min_cluster_points"):
            ClusterParams(min_cluster_points=0)
        with pytest.raises(ValueError, match="connectivity must be 4 or 8"):
            ClusterParams(connectivity=5)


def cluster(pixels):
    return np.asarray(sorted(pixels), dtype=np.int32)


class TestUpdateTemplate:
    def test_first_object_gets_id_one(self):
        prev = LabelTemplate.empty(10, 20, stage=0)
        px = [(r, c) for r in range(10) for c in range(10)]  # 100 pixels
        out = update_template(prev, [cluster(px)], stage=1)
        assert out.stage == 1
        assert (out.labels == 1).sum() == 100
        assert (out.labels == 0).sum() == 100
        assert out.ids() == [1]

    def test_occluding_cluster_overwrites(self):
        prev = LabelTemplate.empty(10, 20, stage=0)
        first = [(r, c) for r in range(10) for c in range(10)]
        t1 = update_template(prev, [cluster(first)], stage=1)
        # 20 of those pixels now belong to the newer, nearer object
        second = [(r, c) for r in range(4) for c in range(2, 7)]
        t2 = update_template(t1, [cluster(second)], stage=2)
        assert (t2.labels == 2).sum() == 20
        assert (t2.labels == 1).sum() == 80
        assert t2.ids() == [1, 2]

    def test_merge_off_numbers_from_previous_max(self):
        labels = np.zeros((5, 20), dtype=np.uint16)
        labels[0, :5] = 1
        prev = LabelTemplate(labels, stage=1)
        clusters = [cluster([(2, c) for c in range(5)]),
                    cluster([(3, c) for c in range(5)]),
                    cluster([(4, c) for c in range(5)])]
        out = update_template(prev, clusters, stage=2, merge=False)
        assert out.ids() == [1, 2, 3, 4]

    def test_merge_on_gives_every_cluster_the_stage_id(self):
        prev = LabelTemplate.empty(5, 20, stage=1)
        clusters = [cluster([(2, c) for c in range(5)]),
                    cluster([(4, c) for c in range(5)])]
        out = update_template(prev, clusters, stage=2, merge=True)
        assert out.ids() == [2]
        assert (out.labels == 2).sum() == 10

    def test_stage_must_increment(self):
        prev = LabelTemplate.empty(4, 4, stage=1)
        with pytest.raises(ValueError, match="stage must be 2, got 3"):
            update_template(prev, [], stage=3)

    def test_overlapping_clusters_rejected(self):
        prev = LabelTemplate.empty(4, 4, stage=0)
        a = cluster([(0, 0), (0, 1)])
        b = cluster([(0, 1), (0, 2)])
        with pytest.raises(ValueError, match="clusters overlap"):
            update_template(prev, [a, b], stage=1)

    def test_bad_cluster_shape_rejected(self):
        prev = LabelTemplate.empty(4, 4, stage=0)
        with pytest.raises(ValueError, match=r"\(n, 2\) array"):
            update_template(prev, [np.zeros((3, 3), dtype=np.int32)], stage=1)

    def test_id_overflow_rejected(self):
        labels = np.zeros((2, 4), dtype=np.uint16)
        labels[0, 0] = MAX_LABEL_ID - 1
        prev = LabelTemplate(labels, stage=7)
        clusters = [cluster([(1, 0)]), cluster([(1, 1)])]
        with pytest.raises(ValueError, match=f"exceeds {MAX_LABEL_ID}"):
            update_template(prev, clusters, stage=8, merge=False)


def three_stage_clouds():
    """Background plane, then a box, then a ball in a different spot."""
    base = cloud_from_z(np.full((24, 32), 1.5))
    z1 = np.full((24, 32), 1.5)
    z1[4:12, 4:12] = 1.0
    z2 = z1.copy()
    z2[10:18, 18:26] = 0.8
    return [base, cloud_from_z(z1), cloud_from_z(z2)]


CPARAMS = ClusterParams(link_distance=0.06, min_cluster_points=20)


class TestLabelClouds:
    def test_two_objects_get_ids_one_and_two(self):
        templates = label_clouds(three_stage_clouds(), cparams=CPARAMS)
        assert len(templates) == 3
        assert templates[0].ids() == []
        assert templates[1].ids() == [1]
        assert templates[2].ids() == [1, 2]
        assert (templates[1].labels == 1).sum() == 64
        assert (templates[2].labels == 2).sum() == 64

    def test_labels_land_on_the_changed_pixels(self):
        templates = label_clouds(three_stage_clouds(), cparams=CPARAMS)
        want1 = np.zeros((24, 32), dtype=bool)
        want1[4:12, 4:12] = True
        assert np.array_equal(templates[1].labels == 1, want1)
        want2 = np.zeros((24, 32), dtype=bool)
        want2[10:18, 18:26] = True
        assert np.array_equal(templates[2].labels == 2, want2)

    def test_earlier_labels_survive_later_stages(self):
        templates = label_clouds(three_stage_clouds(), cparams=CPARAMS)
        moved = templates[2].labels != templates[1].labels
        assert set(np.unique(templates[2].labels[moved])) == {2}

    def test_empty_stage_repeats_labels_and_warns(self):
        clouds = three_stage_clouds()
        clouds.insert(1, clouds[0])  # duplicate background stage
        with pytest.warns(EmptyStageWarning, match="stage 1 added no cluster"):
            templates = label_clouds(clouds, cparams=CPARAMS)
        assert templates[1].ids() == []
        assert templates[1].stage == 1
        # later objects keep their stage numbers as ids
        assert templates[2].ids() == [2]
        assert templates[3].ids() == [2, 3]

    def test_removal_warns(self):
        clouds = three_stage_clouds()
        reversed_clouds = [clouds[1], clouds[0]]  # the box disappears
        with pytest.warns((RemovalWarning, EmptyStageWarning)) as record:
            label_clouds(reversed_clouds, cparams=CPARAMS)
        cats = {r.category for r in record}
        assert RemovalWarning in cats

    def test_deterministic(self):
        a = label_clouds(three_stage_clouds(), cparams=CPARAMS)
        b = label_clouds(three_stage_clouds(), cparams=CPARAMS)
        for ta, tb in zip(a, b):
            assert np.array_equal(ta.labels, tb.labels)

    def test_merge_off_separates_fragments(self):
        clouds = three_stage_clouds()
        # split the second object into two distant parts added together
        z3 = clouds[2].depth.copy()
        z3[0:4, 0:8] = 0.9
        clouds[2] = cloud_from_z(z3)
        merged = label_clouds(clouds, cparams=CPARAMS, merge=True)
        split = label_clouds(clouds, cparams=CPARAMS, merge=False)
        assert merged[2].ids() == [1, 2]
        assert split[2].ids() == [1, 2, 3]

    def test_needs_two_stages(self):
        with pytest.raises(ValueError, match="at least 2 stages, got 1"):
            label_clouds([cloud_from_z(np.ones((4, 4)))])

    def test_all_invalid_stage_rejected(self):
        clouds = [cloud_from_z(np.ones((4, 4))),
                  cloud_from_z(np.full((4, 4), np.nan))]
        with pytest.raises(ValueError, match="stage 1 accumulated to an all-invalid"):
            label_clouds(clouds)


class TestLabelSequence:
    def test_accumulates_then_labels_and_attaches_results(self):
        clouds = three_stage_clouds()
        stages = [Stage(frames=[c, c, c]) for c in clouds]
        seq = SceneSequence(meta=SceneMeta(scene_id="seq"), stages=stages)
        with quiet():
            out = label_sequence(seq, cparams=CPARAMS)
        assert out is seq
        assert [st.template.ids() for st in seq.stages] == [[], [1], [1, 2]]
        for k, st in enumerate(seq.stages):
            assert st.cloud is not None and st.cloud.valid_mask.all()
            assert st.template.stage == k

    def test_matches_label_clouds_on_noiseless_frames(self):
        clouds = three_stage_clouds()
        stages = [Stage(frames=[c] * 3) for c in clouds]
        seq = SceneSequence(meta=SceneMeta(scene_id="seq"), stages=stages)
        with quiet():
            label_sequence(seq, cparams=CPARAMS)
            direct = label_clouds(clouds, cparams=CPARAMS)
        for st, b in zip(seq.stages, direct):
            assert np.array_equal(st.template.labels, b.labels)

    def test_stage_without_frames_rejected(self):
        seq = SceneSequence(meta=SceneMeta(scene_id="seq"),
                            stages=[Stage(frames=[cloud_from_z(np.ones((4, 4)))]),
                                    Stage(frames=[])])
        with pytest.raises(ValueError, match="stage 1 has no frames"):
            label_sequence(seq)

    def test_needs_two_stages(self):
        seq = SceneSequence(meta=SceneMeta(scene_id="seq"),
                            stages=[Stage(frames=[cloud_from_z(np.ones((4, 4)))])])
        with pytest.raises(ValueError, match="at least 2 stages"):
            label_sequence(seq)


class TestTemplateContainer:
    def test_empty_constructor(self):
        t = LabelTemplate.empty(3, 5)
        assert t.labels.shape == (3, 5)
        assert t.stage == 0 and t.ids() == []

    def test_validation(self):
        with pytest.raises(ValueError, match="uint16"):
            LabelTemplate(np.zeros((2, 2), dtype=np.int32), 0)
        with pytest.raises(ValueError, match="2D"):
            LabelTemplate(np.zeros((2, 2, 2), dtype=np.uint16), 0)
        with pytest.raises(ValueError, match="stage must be >= 0"):
            LabelTemplate(np.zeros((2, 2), dtype=np.uint16), -1)

    def test_ids_sorted_without_background(self):
        labels = np.array([[0, 5], [3, 5]], dtype=np.uint16)
        assert LabelTemplate(labels, stage=5).ids() == [3, 5]
