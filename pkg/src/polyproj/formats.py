"""Point-cloud text formats.

Two layouts are read:

* plain: first line ``d ell``, then ``ell`` lines of ``d`` whitespace-separated numbers;
* CSV: header row ``x1,...,xd`` followed by one comma-separated point per row.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .geometry import PointCloud


class CloudFormatError(ValueError):
    pass


def _floats(tokens, lineno):
    try:
        vals = [float(t) for t in tokens]
    except ValueError as exc:
        raise CloudFormatError(f"line {lineno}: {exc}") from None
    if not all(np.isfinite(vals)):
        raise CloudFormatError(f"line {lineno}: non-finite coordinate")
    return vals


def parse_cloud(text: str) -> PointCloud:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise CloudFormatError("empty point-cloud file")
    if lines[0].lstrip().lower().startswith("x"):
        return _parse_csv(lines)
    head = lines[0].split()
    if len(head) != 2:
        raise CloudFormatError("first line must be 'd ell'")
    try:
        d, ell = int(head[0]), int(head[1])
    except ValueError:
        raise CloudFormatError("first line must hold two integers 'd ell'") from None
    if d < 1 or ell < 1:
        raise CloudFormatError("d and ell must be positive")
    rows = lines[1:]
    if len(rows) != ell:
        raise CloudFormatError(f"header announces {ell} points, found {len(rows)}")
    pts = []
    for k, row in enumerate(rows, start=2):
        vals = _floats(row.split(), k)
        if len(vals) != d:
            raise CloudFormatError(f"line {k}: expected {d} coordinates, got {len(vals)}")
        pts.append(vals)
    return PointCloud(np.array(pts))


def _parse_csv(lines) -> PointCloud:
    reader = csv.reader(io.StringIO("\n".join(lines)))
    header = [h.strip() for h in next(reader)]
    d = len(header)
    if header != [f"x{k}" for k in range(1, d + 1)]:
        raise CloudFormatError(f"CSV header must be x1,...,x{d}")
    pts = []
    for k, row in enumerate(reader, start=2):
        vals = _floats(row, k)
        if len(vals) != d:
            raise CloudFormatError(f"row {k}: expected {d} coordinates, got {len(vals)}")
        pts.append(vals)
    if not pts:
        raise CloudFormatError("CSV file has no points")
    return PointCloud(np.array(pts))


def read_cloud(path) -> PointCloud:
    return parse_cloud(Path(path).read_text())


def format_cloud(cloud: PointCloud) -> str:
    pts = cloud.points
    out = [f"{pts.shape[1]} {pts.shape[0]}"]
    out += [" ".join(repr(float(v)) for v in row) for row in pts]
    return "\n".join(out) + "\n"


def write_cloud(cloud: PointCloud, path) -> None:
    Path(path).write_text(format_cloud(cloud))


def read_point(path, dim: int | None = None) -> np.ndarray:
    """Read a single query point: either whitespace/comma separated numbers or a 1-point cloud."""
    text = Path(path).read_text().strip()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) > 1:
        pts = parse_cloud(text).points
        if pts.shape[0] != 1:
            raise CloudFormatError("query-point file holds more than one point")
        z = pts[0]
    else:
        z = np.array(_floats(lines[0].replace(",", " ").split(), 1)) if lines else np.zeros(0)
    if z.size == 0 or (dim is not None and z.size != dim):
        raise CloudFormatError(f"query point has dimension {z.size}, expected {dim}")
    return z
