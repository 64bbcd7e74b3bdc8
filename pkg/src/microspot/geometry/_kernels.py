"""Hot per-pixel loops for warping and mask rasterisation.

Each kernel exists twice: a numba ``@njit`` version and a vectorised numpy
version with identical semantics.  Callers dispatch on
``accel.numba_enabled()``.
"""

from __future__ import annotations

import numpy as np

from ..accel import njit

_EDGE_TOL = 1e-9


# ---------------------------------------------------------------------------
# triangle fill for the piecewise affine warp (reverse mapping + bilinear)

@njit(cache=True)
def warp_triangle_numba(out, image, dst_tri, src_tri):  # pragma: no cover - timed via tests
    h, w = out.shape
    x1, y1 = dst_tri[0, 0], dst_tri[0, 1]
    x2, y2 = dst_tri[1, 0], dst_tri[1, 1]
    x3, y3 = dst_tri[2, 0], dst_tri[2, 1]
    det = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)

    xmin = int(max(0.0, np.floor(min(x1, min(x2, x3)))))
    xmax = int(min(w - 1.0, np.ceil(max(x1, max(x2, x3)))))
    ymin = int(max(0.0, np.floor(min(y1, min(y2, y3)))))
    ymax = int(min(h - 1.0, np.ceil(max(y1, max(y2, y3)))))

    for py in range(ymin, ymax + 1):
        for px in range(xmin, xmax + 1):
            beta = ((px - x1) * (y3 - y1) - (x3 - x1) * (py - y1)) / det
            gamma = ((x2 - x1) * (py - y1) - (px - x1) * (y2 - y1)) / det
            alpha = 1.0 - beta - gamma
            if alpha < -_EDGE_TOL or beta < -_EDGE_TOL or gamma < -_EDGE_TOL:
                continue
            sx = alpha * src_tri[0, 0] + beta * src_tri[1, 0] + gamma * src_tri[2, 0]
            sy = alpha * src_tri[0, 1] + beta * src_tri[1, 1] + gamma * src_tri[2, 1]
            # bilinear sample with edge clamping
            if sx < 0.0:
                sx = 0.0
            elif sx > w - 1.0:
                sx = w - 1.0
            if sy < 0.0:
                sy = 0.0
            elif sy > h - 1.0:
                sy = h - 1.0
            x0 = int(np.floor(sx))
            y0 = int(np.floor(sy))
            x1i = min(x0 + 1, w - 1)
            y1i = min(y0 + 1, h - 1)
            fx = sx - x0
            fy = sy - y0
            out[py, px] = (
                image[y0, x0] * (1.0 - fx) * (1.0 - fy)
                + image[y0, x1i] * fx * (1.0 - fy)
                + image[y1i, x0] * (1.0 - fx) * fy
                + image[y1i, x1i] * fx * fy
            )


def warp_triangle_numpy(out, image, dst_tri, src_tri):
    h, w = out.shape
    (x1, y1), (x2, y2), (x3, y3) = dst_tri
    det = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)

    xmin = int(max(0, np.floor(min(x1, x2, x3))))
    xmax = int(min(w - 1, np.ceil(max(x1, x2, x3))))
    ymin = int(max(0, np.floor(min(y1, y2, y3))))
    ymax = int(min(h - 1, np.ceil(max(y1, y2, y3))))
    if xmax < xmin or ymax < ymin:
        return

    px, py = np.meshgrid(
        np.arange(xmin, xmax + 1, dtype=np.float64),
        np.arange(ymin, ymax + 1, dtype=np.float64),
    )
    beta = ((px - x1) * (y3 - y1) - (x3 - x1) * (py - y1)) / det
    gamma = ((x2 - x1) * (py - y1) - (px - x1) * (y2 - y1)) / det
    alpha = 1.0 - beta - gamma
    inside = (alpha >= -_EDGE_TOL) & (beta >= -_EDGE_TOL) & (gamma >= -_EDGE_TOL)
    if not inside.any():
        return

    a, b, g = alpha[inside], beta[inside], gamma[inside]
    sx = a * src_tri[0, 0] + b * src_tri[1, 0] + g * src_tri[2, 0]
    sy = a * src_tri[0, 1] + b * src_tri[1, 1] + g * src_tri[2, 1]
    sx = np.clip(sx, 0.0, w - 1.0)
    sy = np.clip(sy, 0.0, h - 1.0)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1i = np.minimum(x0 + 1, w - 1)
    y1i = np.minimum(y0 + 1, h - 1)
    fx = sx - x0
    fy = sy - y0
    values = (
        image[y0, x0] * (1.0 - fx) * (1.0 - fy)
        + image[y0, x1i] * fx * (1.0 - fy)
        + image[y1i, x0] * (1.0 - fx) * fy
        + image[y1i, x1i] * fx * fy
    )
    ys, xs = np.nonzero(inside)
    out[ys + ymin, xs + xmin] = values


# ---------------------------------------------------------------------------
# polygon rasterisation (even-odd rule, pixel centres at integer coordinates)

@njit(cache=True)
def fill_polygon_numba(labels, poly, region_id):  # pragma: no cover - timed via tests
    h, w = labels.shape
    n = poly.shape[0]
    xmin = int(max(0.0, np.floor(poly[:, 0].min())))
    xmax = int(min(w - 1.0, np.ceil(poly[:, 0].max())))
    ymin = int(max(0.0, np.floor(poly[:, 1].min())))
    ymax = int(min(h - 1.0, np.ceil(poly[:, 1].max())))
    for py in range(ymin, ymax + 1):
        for px in range(xmin, xmax + 1):
            if labels[py, px] != 0:
                continue
            inside = False
            j = n - 1
            for i in range(n):
                yi = poly[i, 1]
                yj = poly[j, 1]
                if (yi > py) != (yj > py):
                    x_cross = poly[j, 0] + (py - yj) * (poly[i, 0] - poly[j, 0]) / (yi - yj)
                    if px < x_cross:
                        inside = not inside
                j = i
            if inside:
                labels[py, px] = region_id


def fill_polygon_numpy(labels, poly, region_id):
    h, w = labels.shape
    xmin = int(max(0, np.floor(poly[:, 0].min())))
    xmax = int(min(w - 1, np.ceil(poly[:, 0].max())))
    ymin = int(max(0, np.floor(poly[:, 1].min())))
    ymax = int(min(h - 1, np.ceil(poly[:, 1].max())))
    if xmax < xmin or ymax < ymin:
        return
    px, py = np.meshgrid(
        np.arange(xmin, xmax + 1, dtype=np.float64),
        np.arange(ymin, ymax + 1, dtype=np.float64),
    )
    inside = np.zeros(px.shape, dtype=bool)
    n = poly.shape[0]
    j = n - 1
    for i in range(n):
        xi, yi = poly[i]
        xj, yj = poly[j]
        crosses = (yi > py) != (yj > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = xj + (py - yj) * (xi - xj) / (yi - yj)
        inside ^= crosses & (px < x_cross)
        j = i
    block = labels[ymin : ymax + 1, xmin : xmax + 1]
    block[inside & (block == 0)] = region_id
