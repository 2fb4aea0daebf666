import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcinpaint.cloud import PointCloud
from pcinpaint.errors import AllRemoved
from pcinpaint.partition import (PartitionConfig, RegionPartition, draw_removal,
                                 membership_mask, pad_region, partition,
                                 region_points, synthetic_occlude)

CUBE_CORNERS = PointCloud([[sx, sy, sz]
                           for sz in (-1.0, 1.0)
                           for sy in (-1.0, 1.0)
                           for sx in (-1.0, 1.0)])


def octant_of(x, y, z):
    return (1 if x >= 0 else 0) | ((1 if y >= 0 else 0) << 1) | ((1 if z >= 0 else 0) << 2)


clouds = st.integers(0, 10_000).map(
    lambda s: np.random.default_rng(s).uniform(-1, 1, size=(np.random.default_rng(s).integers(1, 60), 3)))


class TestMembership:
    def test_interior_point_in_single_octant(self):
        mask = membership_mask(np.array([[0.5, 0.5, 0.5]]), overlap=0.0)
        assert mask.sum() == 1
        assert mask[0, 7]

    def test_overlap_band_joins_both_octants(self):
        # x = 0.01 with band 0.02 belongs to both x-sides
        mask = membership_mask(np.array([[0.01, 1.0, 1.0]]), overlap=0.02)
        members = set(np.flatnonzero(mask[0]))
        assert members == {7, 6}  # (+,+,+) and (-,+,+)

    def test_plane_point_goes_to_nonnegative_side(self):
        mask = membership_mask(np.array([[0.0, 0.0, 0.0]]), overlap=0.0)
        assert set(np.flatnonzero(mask[0])) == {7}

    @given(clouds, st.floats(0, 0.5))
    @settings(max_examples=60, deadline=None)
    def test_coverage_every_point_in_some_region(self, pts, overlap):
        mask = membership_mask(pts, overlap)
        assert mask.any(axis=1).all()

    @given(clouds)
    @settings(max_examples=60, deadline=None)
    def test_exactness_at_zero_overlap(self, pts):
        mask = membership_mask(pts, 0.0)
        assert mask.sum() == len(pts)
        for row, point in zip(mask, pts):
            assert row[octant_of(*point)]

    @given(clouds, st.floats(0, 0.2), st.floats(0, 0.3))
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_overlap(self, pts, small, extra):
        lo = membership_mask(pts, small)
        hi = membership_mask(pts, small + extra)
        assert (lo <= hi).all()


class TestPartition:
    def test_cube_corners_one_per_region(self):
        cfg = PartitionConfig(overlap=0.0, presence_threshold=1, removal_prob=0.0)
        part = partition(CUBE_CORNERS, cfg)
        for i in range(8):
            region = region_points(CUBE_CORNERS, part, i)
            assert len(region) == 1
            assert octant_of(*region.points[0]) == i
        assert part.present.all() and part.kept.all()

    def test_presence_threshold(self):
        pts = PointCloud([[1.0, 1.0, 1.0]] * 3 + [[-1.0, -1.0, -1.0]] * 4)
        cfg = PartitionConfig(overlap=0.0, presence_threshold=4, removal_prob=0.0)
        part = partition(pts, cfg)
        assert not part.present[7]   # 3 points < threshold 4
        assert part.present[0]
        assert not part.kept[7]      # kept implies present

    def test_determinism(self, rng):
        cloud = PointCloud(rng.uniform(-1, 1, size=(200, 3)))
        cfg = PartitionConfig(seed=77)
        a, b = partition(cloud, cfg), partition(cloud, cfg)
        assert [list(r) for r in a.regions] == [list(r) for r in b.regions]
        np.testing.assert_array_equal(a.present, b.present)
        np.testing.assert_array_equal(a.kept, b.kept)

    def test_empty_region_returns_empty_cloud(self):
        cloud = PointCloud([[1.0, 1.0, 1.0]] * 5)
        part = partition(cloud, PartitionConfig(removal_prob=0.0))
        assert len(region_points(cloud, part, 0)) == 0

    def test_overlap_band_point_returned_by_both_regions(self):
        cloud = PointCloud([[0.01, 1.0, 1.0]])
        part = partition(cloud, PartitionConfig(overlap=0.02, presence_threshold=1,
                                                removal_prob=0.0))
        assert len(region_points(cloud, part, 7)) == 1
        assert len(region_points(cloud, part, 6)) == 1

    def test_json_roundtrip(self, rng):
        cloud = PointCloud(rng.uniform(-1, 1, size=(50, 3)))
        part = partition(cloud, PartitionConfig(seed=3))
        back = RegionPartition.from_json(part.to_json())
        for a, b in zip(part.regions, back.regions):
            np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(part.present, back.present)
        np.testing.assert_array_equal(part.kept, back.kept)


class TestRemoval:
    def test_drop_rate_matches_probability(self):
        # Binomial check on the removal draw: p = 0.20 within +/- 0.005
        # over 1e5 trials per region.
        present = np.ones(8, dtype=bool)
        trials = 100_000
        dropped = np.zeros(8)
        for seed in range(trials):
            kept = draw_removal(present, 0.20, seed)
            dropped += ~kept
        rates = dropped / trials
        assert (np.abs(rates - 0.20) < 0.005).all()

    def test_remove_count_mode(self):
        present = np.array([True] * 5 + [False] * 3)
        for seed in range(200):
            kept = draw_removal(present, 0.2, seed, remove_count=2)
            assert (present & ~kept).sum() == 2
            assert not kept[~present].any()

    def test_remove_count_larger_than_present_rejected(self):
        present = np.array([True] * 2 + [False] * 6)
        with pytest.raises(ValueError):
            draw_removal(present, 0.2, 0, remove_count=3)


class TestSyntheticOcclude:
    def test_zero_removal_is_identity(self, rng):
        cloud = PointCloud(rng.uniform(-1, 1, size=(100, 3)))
        part = partition(cloud, PartitionConfig(removal_prob=0.0))
        out = synthetic_occlude(cloud, part)
        np.testing.assert_array_equal(out.points, cloud.points)

    def test_dropping_one_region_removes_exactly_it(self, rng):
        cloud = PointCloud(rng.uniform(-1, 1, size=(400, 3)))
        cfg = PartitionConfig(overlap=0.0, presence_threshold=1, removal_prob=0.0)
        part = partition(cloud, cfg)
        kept = part.present.copy()
        kept[3] = False
        part = RegionPartition(part.regions, part.present, kept)
        out = synthetic_occlude(cloud, part)
        expected = np.delete(cloud.points, part.regions[3], axis=0)
        np.testing.assert_array_equal(out.points, expected)

    def test_overlap_point_survives_via_other_region(self):
        cloud = PointCloud([[0.01, 1.0, 1.0]])
        part = partition(cloud, PartitionConfig(overlap=0.02, presence_threshold=1,
                                                removal_prob=0.0))
        kept = part.present.copy()
        kept[7] = False  # its other region (6) is still kept
        out = synthetic_occlude(cloud, RegionPartition(part.regions, part.present, kept))
        assert len(out) == 1

    def test_all_removed_raises(self, rng):
        cloud = PointCloud(rng.uniform(-1, 1, size=(100, 3)))
        part = partition(cloud, PartitionConfig(removal_prob=0.0))
        empty = RegionPartition(part.regions, part.present, np.zeros(8, dtype=bool))
        with pytest.raises(AllRemoved):
            synthetic_occlude(cloud, empty)


class TestPadRegion:
    def test_large_region_resampled_from_itself(self, rng):
        region = PointCloud(rng.uniform(0, 1, size=(500, 3)))
        out = pad_region(region, 387)
        assert len(out) == 387
        assert {tuple(p) for p in out.points} <= {tuple(p) for p in region.points}

    def test_empty_region_padded_with_zeros(self):
        out = pad_region(PointCloud(np.zeros((0, 3))), 387)
        assert len(out) == 387
        np.testing.assert_array_equal(out.points, 0.0)

    def test_below_threshold_region_is_zeroed(self, rng):
        region = PointCloud(rng.uniform(0, 1, size=(3, 3)))
        out = pad_region(region, 387, presence_threshold=4)
        np.testing.assert_array_equal(out.points, 0.0)

    def test_exact_size_region_is_permutation(self, rng):
        region = PointCloud(rng.uniform(0, 1, size=(387, 3)))
        out = pad_region(region, 387)
        assert sorted(map(tuple, out.points)) == sorted(map(tuple, region.points))
