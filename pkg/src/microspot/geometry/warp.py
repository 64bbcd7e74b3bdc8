"""Delaunay meshing, barycentric coordinates, and piecewise affine warping.

Warping uses the reverse mapping: for every destination pixel the containing
destination triangle is found, its barycentric coordinates are computed, and
the source image is sampled bilinearly at the matching source location.  The
resulting map is continuous across triangle edges but not smooth.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay as _SciPyDelaunay
from scipy.spatial import QhullError

from .. import accel
from . import _kernels

DEGENERATE_AREA = 1e-12


class DegenerateGeometryError(ValueError):
    """Raised for meshes or triangles without usable area."""


@dataclass(frozen=True)
class TriangleMesh:
    """A triangulation: (n, 2) vertices and (m, 3) vertex-index triples."""

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        vertices.flags.writeable = False
        triangles.flags.writeable = False
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "triangles", triangles)


def _signed_area(p1, p2, p3) -> float:
    return 0.5 * (
        (p2[0] - p1[0]) * (p3[1] - p1[1]) - (p3[0] - p1[0]) * (p2[1] - p1[1])
    )


def delaunay(points: np.ndarray) -> TriangleMesh:
    """Delaunay-triangulate the convex hull of the given control points.

    The output is canonicalised (vertex indices sorted within each triangle,
    triangles sorted lexicographically) so identical input always yields an
    identical mesh, including for co-circular point sets.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError(f"expected (n, 2) points, got {points.shape}")
    if len(points) < 3:
        raise DegenerateGeometryError(f"need at least 3 points, got {len(points)}")
    try:
        tri = _SciPyDelaunay(points)
    except QhullError as exc:
        raise DegenerateGeometryError(f"degenerate point set: {exc}") from exc
    simplices = np.sort(tri.simplices, axis=1)
    # drop slivers that qhull can emit for collinear boundary subsets
    keep = [
        s
        for s in simplices
        if abs(_signed_area(points[s[0]], points[s[1]], points[s[2]])) > DEGENERATE_AREA
    ]
    if not keep:
        raise DegenerateGeometryError("all points collinear")
    order = np.lexsort(np.array(keep).T[::-1])
    return TriangleMesh(vertices=points, triangles=np.array(keep)[order])


def barycentric(point, tri) -> tuple[float, float, float]:
    """Barycentric coordinates (alpha, beta, gamma) of a point in a triangle.

    The coordinates sum to one; the point lies inside the triangle exactly
    when all three are within [0, 1].
    """
    (x1, y1), (x2, y2), (x3, y3) = np.asarray(tri, dtype=np.float64)
    x, y = float(point[0]), float(point[1])
    det = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)
    if abs(det) < DEGENERATE_AREA:
        raise DegenerateGeometryError("zero-area triangle")
    beta = ((x - x1) * (y3 - y1) - (x3 - x1) * (y - y1)) / det
    gamma = ((x2 - x1) * (y - y1) - (x - x1) * (y2 - y1)) / det
    alpha = 1.0 - beta - gamma
    return alpha, beta, gamma


def map_points(points: np.ndarray, mesh: TriangleMesh, dst_points: np.ndarray,
               tol: float = 1e-9) -> np.ndarray:
    """Map points through the piecewise affine transform mesh -> dst_points.

    Each point is located in the mesh (first containing triangle in canonical
    order wins on shared edges), its barycentric coordinates are computed,
    and the matching destination vertices are blended.  Points outside the
    mesh hull raise ValueError.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    dst = np.asarray(dst_points, dtype=np.float64)
    if dst.shape != mesh.vertices.shape:
        raise ValueError("dst_points must match mesh vertices in shape")
    out = np.empty_like(points)
    for i, p in enumerate(points):
        for tri_idx in mesh.triangles:
            a, b, g = barycentric(p, mesh.vertices[tri_idx])
            if min(a, b, g) >= -tol:
                out[i] = a * dst[tri_idx[0]] + b * dst[tri_idx[1]] + g * dst[tri_idx[2]]
                break
        else:
            raise ValueError(f"point {tuple(p)} lies outside the mesh hull")
    return out


def pwa_warp(image: np.ndarray, src_mesh: TriangleMesh, dst_points: np.ndarray) -> np.ndarray:
    """Warp an image so src_mesh vertices land on dst_points.

    Destination pixels outside the destination hull stay 0; degenerate
    destination triangles are skipped with a warning.
    """
    image = np.ascontiguousarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError("expected a 2D grayscale image")
    dst = np.ascontiguousarray(dst_points, dtype=np.float64)
    if dst.shape != src_mesh.vertices.shape:
        raise ValueError(
            f"point count mismatch: mesh has {len(src_mesh.vertices)}, "
            f"destination has {len(dst)}"
        )

    out = np.zeros_like(image)
    use_numba = accel.numba_enabled()
    for tri_idx in src_mesh.triangles:
        dst_tri = dst[tri_idx]
        src_tri = src_mesh.vertices[tri_idx]
        if abs(_signed_area(*dst_tri)) < DEGENERATE_AREA:
            warnings.warn(
                f"skipping degenerate destination triangle {tuple(tri_idx)}",
                stacklevel=2,
            )
            continue
        if use_numba:
            _kernels.warp_triangle_numba(out, image, dst_tri, src_tri)
        else:
            _kernels.warp_triangle_numpy(out, image, dst_tri, src_tri)
    return out
