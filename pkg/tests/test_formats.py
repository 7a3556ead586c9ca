import numpy as np
import pytest

from helpers import WORKED
from polyproj.formats import CloudFormatError, format_cloud, parse_cloud, read_point, write_cloud, read_cloud
from polyproj.geometry import PointCloud


def test_plain_round_trip(tmp_path):
    cloud = PointCloud(np.random.default_rng(0).normal(size=(7, 3)))
    write_cloud(cloud, tmp_path / "c.txt")
    assert np.array_equal(read_cloud(tmp_path / "c.txt").points, cloud.points)


def test_csv_layout():
    cloud = parse_cloud("x1,x2\n0,4\n0,2\n2,2\n-2,1\n")
    assert np.array_equal(cloud.points, WORKED)


@pytest.mark.parametrize("text", [
    "",
    "2 3\n0 0\n1 1\n",
    "2 1\n0 0 0\n",
    "2 1\n0 nan\n",
    "two 1\n0 0\n",
    "x1,x3\n0,0\n",
    "x1,x2\n",
])
def test_bad_inputs(text):
    with pytest.raises(CloudFormatError):
        parse_cloud(text)


def test_read_point(tmp_path):
    (tmp_path / "z.txt").write_text("1.5, -2\n")
    assert np.array_equal(read_point(tmp_path / "z.txt", 2), [1.5, -2.0])
    (tmp_path / "z2.txt").write_text("2 1\n3 4\n")
    assert np.array_equal(read_point(tmp_path / "z2.txt"), [3.0, 4.0])
    with pytest.raises(CloudFormatError):
        read_point(tmp_path / "z.txt", 3)


def test_format_is_header_plus_rows():
    assert format_cloud(PointCloud(WORKED)).splitlines()[0] == "2 4"
