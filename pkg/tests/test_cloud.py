import numpy as np
import pytest

from depthlabel import CameraIntrinsics, FactorTags, OrganizedCloud, cloud_from_depth, ray_tangents
from depthlabel.cloud import SceneMeta, Subset, pixel_to_ray

from helpers import simple_intrinsics


class TestCameraIntrinsics:
    def test_rejects_nonpositive_focal_length(self):
        with pytest.raises(ValueError, match="focal lengths"):
            CameraIntrinsics(fx=0.0, fy=40.0, cx=10.0, cy=10.0, width=32, height=24)

    def test_rejects_principal_point_off_sensor(self):
        with pytest.raises(ValueError, match="principal point"):
            CameraIntrinsics(fx=40.0, fy=40.0, cx=40.0, cy=10.0, width=32, height=24)


class TestOrganizedCloud:
    def test_shape_and_dtype_validation(self):
        with pytest.raises(ValueError, match=r"points must be \(h, w, 3\)"):
            OrganizedCloud(np.zeros((4, 3), dtype=np.float32))
        with pytest.raises(ValueError, match="float32 or float64"):
            OrganizedCloud(np.zeros((4, 5, 3), dtype=np.int32))

    def test_color_must_match_grid_and_dtype(self):
        pts = np.zeros((4, 5, 3), dtype=np.float32)
        with pytest.raises(ValueError, match="color grid"):
            OrganizedCloud(pts, color=np.zeros((4, 4, 3), dtype=np.uint8))
        with pytest.raises(ValueError, match="color must be uint8"):
            OrganizedCloud(pts, color=np.zeros((4, 5, 3), dtype=np.float32))

    def test_valid_mask_requires_all_finite_coordinates(self):
        pts = np.ones((2, 3, 3), dtype=np.float32)
        pts[0, 0, 0] = np.nan
        pts[1, 2, 2] = np.inf
        cloud = OrganizedCloud(pts)
        expected = np.ones((2, 3), dtype=bool)
        expected[0, 0] = False
        expected[1, 2] = False
        assert np.array_equal(cloud.valid_mask, expected)

    def test_depth_and_dimensions(self):
        pts = np.arange(2 * 3 * 3, dtype=np.float64).reshape(2, 3, 3)
        cloud = OrganizedCloud(pts)
        assert cloud.width == 3 and cloud.height == 2
        assert np.array_equal(cloud.depth, pts[:, :, 2])

    def test_same_grid(self):
        a = OrganizedCloud(np.zeros((4, 5, 3), dtype=np.float32))
        b = OrganizedCloud(np.ones((4, 5, 3), dtype=np.float64))
        c = OrganizedCloud(np.zeros((5, 4, 3), dtype=np.float32))
        assert a.same_grid(b)
        assert not a.same_grid(c)


class TestRays:
    def test_pixel_to_ray_is_unit_length_and_centered(self):
        intr = simple_intrinsics()
        center = pixel_to_ray(intr, intr.cx, intr.cy)
        assert np.allclose(center, [0.0, 0.0, 1.0])
        edge = pixel_to_ray(intr, 0, 0)
        assert np.isclose(np.linalg.norm(edge), 1.0)
        assert edge[0] < 0 and edge[1] < 0

    def test_pixel_to_ray_rejects_off_sensor(self):
        intr = simple_intrinsics()
        with pytest.raises(ValueError, match="outside"):
            pixel_to_ray(intr, intr.width, 0)

    def test_ray_tangents_match_projection_model(self):
        intr = simple_intrinsics(width=8, height=6, fx=10.0, fy=20.0)
        tan_x, tan_y = ray_tangents(intr)
        assert tan_x.shape == (6, 8)
        # tangent times depth must reproduce the pinhole back-projection
        u, v, z = 5, 2, 1.7
        assert np.isclose(tan_x[v, u] * z, (u - intr.cx) / intr.fx * z)
        assert np.isclose(tan_y[v, u] * z, (v - intr.cy) / intr.fy * z)


class TestCloudFromDepth:
    def test_millimeters_to_meters_and_zero_is_invalid(self):
        intr = simple_intrinsics(width=4, height=3)
        depth = np.full((3, 4), 1500, dtype=np.uint16)
        depth[1, 2] = 0
        cloud = cloud_from_depth(depth, intr)
        assert cloud.points.dtype == np.float32
        assert np.isclose(cloud.depth[0, 0], 1.5)
        assert not cloud.valid_mask[1, 2]
        assert cloud.valid_mask.sum() == 11

    def test_back_projection_geometry(self):
        intr = simple_intrinsics(width=4, height=3, fx=10.0, fy=10.0)
        depth = np.full((3, 4), 2000, dtype=np.uint16)
        cloud = cloud_from_depth(depth, intr)
        u, v = 3, 0
        assert np.isclose(cloud.points[v, u, 0], (u - intr.cx) / intr.fx * 2.0)
        assert np.isclose(cloud.points[v, u, 1], (v - intr.cy) / intr.fy * 2.0)

    def test_shape_mismatch_rejected(self):
        intr = simple_intrinsics(width=4, height=3)
        with pytest.raises(ValueError, match="does not match intrinsics"):
            cloud_from_depth(np.zeros((4, 4), dtype=np.uint16), intr)

    def test_carries_color(self):
        intr = simple_intrinsics(width=4, height=3)
        color = np.full((3, 4, 3), 9, dtype=np.uint8)
        cloud = cloud_from_depth(np.ones((3, 4), dtype=np.uint16), intr, color=color)
        assert np.array_equal(cloud.color, color)


class TestSceneMeta:
    def test_factor_tags_from_strings(self):
        tags = FactorTags.from_strings("free", "cuboid", "table", "top")
        assert tags.clutter == "free"
        assert tags.viewpoint == "top"

    def test_unknown_factor_value_rejected(self):
        with pytest.raises(ValueError, match="front"):
            FactorTags.from_strings(viewpoint="front")

    def test_defaults(self):
        meta = SceneMeta(scene_id="s1")
        assert meta.subset is Subset.OTHER
        assert meta.frames_per_stage == 20
