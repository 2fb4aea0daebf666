import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcinpaint.cloud import PointCloud, load_cloud, save_cloud
from pcinpaint.errors import EmptyCloud, IoFailure, MalformedFile

finite_coords = st.floats(min_value=-100.0, max_value=100.0,
                          allow_nan=False, allow_infinity=False)


def test_xyz_parses_rows_in_order(tmp_path):
    path = tmp_path / "tri.xyz"
    path.write_text("0 0 0\n1 0 0\n0 1 0\n")
    cloud = load_cloud(path)
    np.testing.assert_array_equal(cloud.points,
                                  [[0, 0, 0], [1, 0, 0], [0, 1, 0]])


def test_xyz_skips_comments_and_blanks(tmp_path):
    path = tmp_path / "c.xyz"
    path.write_text("# header\n\n1 2 3  # trailing note\n")
    cloud = load_cloud(path)
    np.testing.assert_array_equal(cloud.points, [[1, 2, 3]])


def test_xyz_nan_row_is_malformed(tmp_path):
    path = tmp_path / "bad.xyz"
    path.write_text("0 0 nan\n")
    with pytest.raises(MalformedFile):
        load_cloud(path)


def test_xyz_wrong_arity_is_malformed(tmp_path):
    path = tmp_path / "bad.xyz"
    path.write_text("0 0\n")
    with pytest.raises(MalformedFile):
        load_cloud(path)


def test_empty_file_raises_empty_cloud(tmp_path):
    path = tmp_path / "none.xyz"
    path.write_text("# only a comment\n")
    with pytest.raises(EmptyCloud):
        load_cloud(path)


def test_ascii_ply_matches_header_count(tmp_path):
    path = tmp_path / "two.ply"
    path.write_text(
        "ply\nformat ascii 1.0\nelement vertex 2\n"
        "property float x\nproperty float y\nproperty float z\n"
        "end_header\n0 0 0\n1.5 2.5 3.5\n")
    cloud = load_cloud(path)
    assert len(cloud) == 2
    np.testing.assert_allclose(cloud.points[1], [1.5, 2.5, 3.5])


def test_ply_with_extra_vertex_property(tmp_path):
    path = tmp_path / "extra.ply"
    path.write_text(
        "ply\nformat ascii 1.0\nelement vertex 1\n"
        "property float confidence\nproperty float x\nproperty float y\n"
        "property float z\nend_header\n0.9 1 2 3\n")
    cloud = load_cloud(path)
    np.testing.assert_allclose(cloud.points, [[1, 2, 3]])


def test_ply_ignores_non_vertex_elements(tmp_path):
    path = tmp_path / "faces.ply"
    path.write_text(
        "ply\nformat ascii 1.0\ncomment generated\n"
        "element dummy 2\nproperty float a\n"
        "element vertex 1\nproperty float x\nproperty float y\n"
        "property float z\nend_header\n9\n9\n4 5 6\n")
    cloud = load_cloud(path)
    np.testing.assert_allclose(cloud.points, [[4, 5, 6]])


def test_ply_binary_float32_vertices(tmp_path):
    import struct
    path = tmp_path / "f32.ply"
    header = ("ply\nformat binary_little_endian 1.0\nelement vertex 2\n"
              "property float x\nproperty float y\nproperty float z\n"
              "end_header\n").encode()
    body = struct.pack("<6f", 1, 2, 3, 4, 5, 6)
    path.write_bytes(header + body)
    cloud = load_cloud(path)
    np.testing.assert_allclose(cloud.points, [[1, 2, 3], [4, 5, 6]])


def test_ply_list_property_rejected(tmp_path):
    path = tmp_path / "list.ply"
    path.write_text(
        "ply\nformat ascii 1.0\nelement face 1\n"
        "property list uchar int vertex_indices\nelement vertex 1\n"
        "property float x\nproperty float y\nproperty float z\n"
        "end_header\n3 0 1 2\n1 2 3\n")
    with pytest.raises(MalformedFile):
        load_cloud(path)


def test_ply_truncated_binary_is_malformed(tmp_path):
    path = tmp_path / "trunc.ply"
    header = ("ply\nformat binary_little_endian 1.0\nelement vertex 5\n"
              "property float x\nproperty float y\nproperty float z\n"
              "end_header\n").encode()
    path.write_bytes(header + b"\x00" * 10)
    with pytest.raises(MalformedFile):
        load_cloud(path)


def test_binary_ply_roundtrip_is_bitwise(tmp_path, rng):
    cloud = PointCloud(rng.standard_normal((100, 3)))
    path = tmp_path / "rt.ply"
    save_cloud(cloud, path)
    back = load_cloud(path)
    np.testing.assert_array_equal(back.points, cloud.points)


def test_ascii_xyz_roundtrip_within_1e6(tmp_path, rng):
    cloud = PointCloud(rng.standard_normal((100, 3)) * 3.0)
    path = tmp_path / "rt.xyz"
    save_cloud(cloud, path, digits=9)
    back = load_cloud(path)
    assert np.abs(back.points - cloud.points).max() < 1e-6


def test_ascii_ply_roundtrip(tmp_path, rng):
    cloud = PointCloud(rng.standard_normal((10, 3)))
    path = tmp_path / "rt_ascii.ply"
    save_cloud(cloud, path, format="ply-ascii")
    back = load_cloud(path, format="ply")
    assert np.abs(back.points - cloud.points).max() < 1e-6


def test_unwritable_directory_raises_iofailure(rng):
    cloud = PointCloud(rng.standard_normal((3, 3)))
    with pytest.raises(IoFailure):
        save_cloud(cloud, "/nonexistent_dir_zz/x.ply")


def test_missing_file_raises_iofailure(tmp_path):
    with pytest.raises(IoFailure):
        load_cloud(tmp_path / "absent.xyz")


@given(st.lists(st.tuples(finite_coords, finite_coords, finite_coords),
                min_size=1, max_size=40))
@settings(max_examples=30, deadline=None)
def test_roundtrip_property(tmp_path_factory, pts):
    cloud = PointCloud(np.array(pts))
    base = tmp_path_factory.mktemp("rt")
    save_cloud(cloud, base / "c.ply")
    np.testing.assert_array_equal(load_cloud(base / "c.ply").points, cloud.points)
    save_cloud(cloud, base / "c.xyz")
    assert np.abs(load_cloud(base / "c.xyz").points - cloud.points).max() < 1e-6
