"""Hot per-pixel kernels for the three descriptors.

Each kernel has a numba ``@njit`` implementation and a vectorised numpy
fallback with the same semantics; callers dispatch on
``accel.numba_enabled()``.  These loops dominate pipeline runtime at
200 fps, which is why they are the ones carrying jitted twins.
"""

from __future__ import annotations

import numpy as np

from ..accel import njit

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# 3D HOG accumulation
#
# For each plane the orientation is atan2(second-axis gradient, first-axis
# gradient) over the pairs XY:(Ix,Iy), XT:(Ix,It), YT:(Iy,It); the vote is
# the Euclidean magnitude of the pair, linearly interpolated between the two
# adjacent circular bins (bin centres at (b + 0.5) * 2pi/B).

@njit(cache=True)
def hog3d_hist_numba(ix, iy, it, labels, n_regions, bins):  # pragma: no cover
    n, h, w = ix.shape
    hist = np.zeros((n_regions, n, 3, bins))
    bin_width = TWO_PI / bins
    for t in range(n):
        for y in range(h):
            for x in range(w):
                r = labels[y, x]
                if r == 0:
                    continue
                for plane in range(3):
                    if plane == 0:
                        a = ix[t, y, x]
                        b = iy[t, y, x]
                    elif plane == 1:
                        a = ix[t, y, x]
                        b = it[t, y, x]
                    else:
                        a = iy[t, y, x]
                        b = it[t, y, x]
                    mag = np.sqrt(a * a + b * b)
                    if mag == 0.0:
                        continue
                    theta = np.arctan2(b, a)
                    if theta < 0.0:
                        theta += TWO_PI
                    u = theta / bin_width - 0.5
                    b0 = int(np.floor(u))
                    frac = u - b0
                    b0 = b0 % bins
                    b1 = (b0 + 1) % bins
                    hist[r - 1, t, plane, b0] += mag * (1.0 - frac)
                    hist[r - 1, t, plane, b1] += mag * frac
    return hist


def hog3d_hist_numpy(ix, iy, it, labels, n_regions, bins):
    n = ix.shape[0]
    hist = np.zeros((n_regions, n, 3, bins))
    bin_width = TWO_PI / bins
    lab = labels.ravel()
    sel = lab > 0
    lab0 = lab[sel] - 1
    pairs = ((ix, iy), (ix, it), (iy, it))
    for t in range(n):
        for plane, (first, second) in enumerate(pairs):
            a = first[t].ravel()[sel]
            b = second[t].ravel()[sel]
            mag = np.hypot(a, b)
            theta = np.mod(np.arctan2(b, a), TWO_PI)
            u = theta / bin_width - 0.5
            b0f = np.floor(u)
            frac = u - b0f
            b0 = b0f.astype(np.int64) % bins
            b1 = (b0 + 1) % bins
            counts = np.bincount(
                lab0 * bins + b0, weights=mag * (1.0 - frac), minlength=n_regions * bins
            )
            counts += np.bincount(
                lab0 * bins + b1, weights=mag * frac, minlength=n_regions * bins
            )
            hist[:, t, plane, :] = counts.reshape(n_regions, bins)
    return hist


# ---------------------------------------------------------------------------
# LBP-TOP codes
#
# Classic 8-neighbour local binary pattern on each orthogonal slice through
# the pixel.  Neighbour positions on the radius-r ring are rounded to the
# nearest pixel (for radius 1 this is the integer 3x3 ring), and samples
# beyond the volume edge are clamped (edge replication), so every frame has
# all three plane codes defined.

def lbp_offsets(radii: tuple[int, int, int]) -> np.ndarray:
    """(3, 8, 3) table of (dt, dy, dx) offsets per plane and neighbour."""
    rx, ry, rt = radii
    out = np.zeros((3, 8, 3), dtype=np.int64)
    for p in range(8):
        angle = TWO_PI * p / 8.0
        c, s = np.cos(angle), np.sin(angle)
        out[0, p] = (0, int(np.round(-ry * s)), int(np.round(rx * c)))  # XY
        out[1, p] = (int(np.round(rt * s)), 0, int(np.round(rx * c)))  # XT
        out[2, p] = (int(np.round(rt * s)), int(np.round(-ry * c)), 0)  # YT
    return out


@njit(cache=True)
def lbp_codes_numba(volume, offsets):  # pragma: no cover
    n, h, w = volume.shape
    codes = np.zeros((3, n, h, w), dtype=np.uint8)
    for plane in range(3):
        for t in range(n):
            for y in range(h):
                for x in range(w):
                    centre = volume[t, y, x]
                    code = 0
                    for p in range(8):
                        tt = t + offsets[plane, p, 0]
                        yy = y + offsets[plane, p, 1]
                        xx = x + offsets[plane, p, 2]
                        if tt < 0:
                            tt = 0
                        elif tt > n - 1:
                            tt = n - 1
                        if yy < 0:
                            yy = 0
                        elif yy > h - 1:
                            yy = h - 1
                        if xx < 0:
                            xx = 0
                        elif xx > w - 1:
                            xx = w - 1
                        if volume[tt, yy, xx] >= centre:
                            code |= 1 << p
                    codes[plane, t, y, x] = code
    return codes


def lbp_codes_numpy(volume, offsets):
    n, h, w = volume.shape
    pad = int(np.abs(offsets).max())
    padded = np.pad(volume, pad, mode="edge")
    codes = np.zeros((3, n, h, w), dtype=np.uint8)
    for plane in range(3):
        for p in range(8):
            dt, dy, dx = offsets[plane, p]
            neighbour = padded[
                pad + dt : pad + dt + n,
                pad + dy : pad + dy + h,
                pad + dx : pad + dx + w,
            ]
            codes[plane] |= (neighbour >= volume).astype(np.uint8) << p
    return codes


def uniform_lbp_table(neighbours: int = 8) -> np.ndarray:
    """Map raw LBP codes to uniform-pattern bins (59 bins for P=8).

    Patterns with at most two circular 0/1 transitions get their own bin in
    ascending code order; everything else shares the final bin.
    """
    if neighbours != 8:
        raise ValueError("uniform mapping is defined here for 8 neighbours")
    table = np.empty(256, dtype=np.int64)
    next_bin = 0
    for code in range(256):
        bits = [(code >> i) & 1 for i in range(8)]
        transitions = sum(bits[i] != bits[(i + 1) % 8] for i in range(8))
        if transitions <= 2:
            table[code] = next_bin
            next_bin += 1
        else:
            table[code] = 58
    assert next_bin == 58
    return table


# ---------------------------------------------------------------------------
# Horn-Schunck optical flow
#
# Jacobi iterations of the classic smoothness-regularised flow between two
# frames.  Derivatives: central differences of the frame average for Ix/Iy,
# plain temporal difference for It.  The neighbourhood average uses the
# standard 3x3 weights with edge-replicated borders.

_HS_W_SIDE = 1.0 / 6.0
_HS_W_DIAG = 1.0 / 12.0


def hs_derivatives(f1: np.ndarray, f2: np.ndarray):
    avg = 0.5 * (f1 + f2)
    iy, ix = np.gradient(avg, axis=(0, 1), edge_order=1)
    it = f2 - f1
    return ix, iy, it


@njit(cache=True)
def _hs_average_numba(field, out):  # pragma: no cover
    h, w = field.shape
    for y in range(h):
        ym = y - 1 if y > 0 else 0
        yp = y + 1 if y < h - 1 else h - 1
        for x in range(w):
            xm = x - 1 if x > 0 else 0
            xp = x + 1 if x < w - 1 else w - 1
            out[y, x] = _HS_W_SIDE * (
                field[ym, x] + field[yp, x] + field[y, xm] + field[y, xp]
            ) + _HS_W_DIAG * (
                field[ym, xm] + field[ym, xp] + field[yp, xm] + field[yp, xp]
            )


@njit(cache=True)
def horn_schunck_numba(ix, iy, it, alpha, n_iters):  # pragma: no cover
    h, w = ix.shape
    u = np.zeros((h, w))
    v = np.zeros((h, w))
    ubar = np.zeros((h, w))
    vbar = np.zeros((h, w))
    alpha2 = alpha * alpha
    for _ in range(n_iters):
        _hs_average_numba(u, ubar)
        _hs_average_numba(v, vbar)
        for y in range(h):
            for x in range(w):
                num = ix[y, x] * ubar[y, x] + iy[y, x] * vbar[y, x] + it[y, x]
                den = alpha2 + ix[y, x] * ix[y, x] + iy[y, x] * iy[y, x]
                u[y, x] = ubar[y, x] - ix[y, x] * num / den
                v[y, x] = vbar[y, x] - iy[y, x] * num / den
    return u, v


def _hs_average_numpy(field: np.ndarray) -> np.ndarray:
    p = np.pad(field, 1, mode="edge")
    return _HS_W_SIDE * (p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:]) + _HS_W_DIAG * (
        p[:-2, :-2] + p[:-2, 2:] + p[2:, :-2] + p[2:, 2:]
    )


def horn_schunck_numpy(ix, iy, it, alpha, n_iters):
    u = np.zeros_like(ix)
    v = np.zeros_like(ix)
    den = alpha * alpha + ix * ix + iy * iy
    for _ in range(n_iters):
        ubar = _hs_average_numpy(u)
        vbar = _hs_average_numpy(v)
        num = ix * ubar + iy * vbar + it
        u = ubar - ix * num / den
        v = vbar - iy * num / den
    return u, v
