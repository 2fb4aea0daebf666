import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcinpaint.cloud import (NoiseSpec, PointCloud, RigidPose, apply_pose,
                             compose, resample, sample_pose_noise)
from pcinpaint.errors import EmptyCloud, InvalidPose


def rotation_angle_deg(rot: np.ndarray) -> float:
    c = np.clip((np.trace(rot) - 1.0) / 2.0, -1.0, 1.0)
    return float(np.degrees(np.arccos(c)))


def random_pose(seed: int) -> RigidPose:
    return sample_pose_noise(NoiseSpec(180.0, 1.0, seed=seed))


class TestPointCloud:
    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            PointCloud([[0.0, 0.0, np.nan]])

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            PointCloud(np.zeros((4, 2)))

    def test_immutable(self):
        c = PointCloud([[1.0, 2.0, 3.0]])
        with pytest.raises(ValueError):
            c.points[0, 0] = 5.0
        with pytest.raises(AttributeError):
            c.points = np.zeros((1, 3))

    def test_empty_allowed_but_bounds_raise(self):
        c = PointCloud(np.zeros((0, 3)))
        assert len(c) == 0
        with pytest.raises(EmptyCloud):
            c.bounds()


class TestRigidPose:
    def test_identity_pose_leaves_cloud_unchanged(self, rng):
        cloud = PointCloud(rng.standard_normal((50, 3)))
        out = apply_pose(cloud, RigidPose.identity())
        np.testing.assert_array_equal(out.points, cloud.points)

    def test_quarter_turn_about_z(self):
        rot = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        out = apply_pose(PointCloud([[1.0, 0.0, 0.0]]), RigidPose(rot, np.zeros(3)))
        np.testing.assert_allclose(out.points, [[0.0, 1.0, 0.0]], atol=1e-12)

    def test_compose_with_inverse_is_identity(self, rng):
        pose = random_pose(7)
        cloud = PointCloud(rng.standard_normal((20, 3)))
        back = apply_pose(apply_pose(cloud, pose), pose.inverse())
        np.testing.assert_allclose(back.points, cloud.points, atol=1e-9)
        both = compose(pose.inverse(), pose)
        np.testing.assert_allclose(both.rotation, np.eye(3), atol=1e-9)
        np.testing.assert_allclose(both.translation, 0.0, atol=1e-9)

    def test_invalid_rotation_rejected(self):
        with pytest.raises(InvalidPose):
            RigidPose(np.eye(3) * 2.0, np.zeros(3))
        with pytest.raises(InvalidPose):
            RigidPose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))  # det -1

    @given(st.integers(0, 10_000))
    @settings(max_examples=50, deadline=None)
    def test_rigid_transforms_preserve_pairwise_distances(self, seed):
        gen = np.random.default_rng(seed)
        cloud = PointCloud(gen.standard_normal((12, 3)))
        moved = apply_pose(cloud, random_pose(seed))
        d0 = np.linalg.norm(cloud.points[:, None] - cloud.points[None], axis=-1)
        d1 = np.linalg.norm(moved.points[:, None] - moved.points[None], axis=-1)
        np.testing.assert_allclose(d0, d1, atol=1e-9)


class TestResample:
    def test_downsample_returns_distinct_originals(self, rng):
        cloud = PointCloud(rng.standard_normal((5000, 3)))
        out = resample(cloud, 3096, seed=3)
        assert len(out) == 3096
        rows = {tuple(p) for p in out.points}
        assert len(rows) == 3096
        original = {tuple(p) for p in cloud.points}
        assert rows <= original

    def test_same_size_is_permutation(self, rng):
        cloud = PointCloud(rng.standard_normal((64, 3)))
        out = resample(cloud, 64, seed=5)
        assert sorted(map(tuple, out.points)) == sorted(map(tuple, cloud.points))

    def test_upsample_keeps_all_originals_plus_duplicates(self, rng):
        cloud = PointCloud(rng.standard_normal((10, 3)))
        out = resample(cloud, 25, seed=9)
        assert len(out) == 25
        original = list(map(tuple, cloud.points))
        got = list(map(tuple, out.points))
        assert got[:10] == original
        assert set(got[10:]) <= set(original)

    def test_deterministic(self, rng):
        cloud = PointCloud(rng.standard_normal((100, 3)))
        a = resample(cloud, 40, seed=11)
        b = resample(cloud, 40, seed=11)
        np.testing.assert_array_equal(a.points, b.points)

    def test_empty_raises(self):
        with pytest.raises(EmptyCloud):
            resample(PointCloud(np.zeros((0, 3))), 5, seed=0)


class TestPoseNoise:
    def test_zero_spec_gives_identity(self):
        pose = sample_pose_noise(NoiseSpec(0.0, 0.0, seed=42))
        np.testing.assert_allclose(pose.rotation, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(pose.translation, 0.0, atol=1e-12)

    def test_bounds_respected_over_many_draws(self):
        max_deg, max_trans = 5.0, 0.01
        for seed in range(10_000):
            pose = sample_pose_noise(NoiseSpec(max_deg, max_trans, seed=seed))
            assert rotation_angle_deg(pose.rotation) <= max_deg + 1e-9
            assert np.linalg.norm(pose.translation) <= max_trans + 1e-12

    def test_mean_angle_is_half_max(self):
        # Monte-Carlo over the sampler itself: uniform angle in [0, 10]
        # must average 5 degrees.
        n = 100_000
        total = 0.0
        for seed in range(n):
            pose = sample_pose_noise(NoiseSpec(10.0, 0.0, seed=seed))
            total += rotation_angle_deg(pose.rotation)
        assert abs(total / n - 5.0) < 0.1

    def test_negative_bounds_rejected(self):
        with pytest.raises(ValueError):
            NoiseSpec(-1.0, 0.0, seed=0)
