#!/usr/bin/env python3
"""Generate the bundled 26-region face atlas data file.

The atlas lives on a 256x256 canonical face: 83 control points (full face
outline including the hairline, brows, eye rims, nose, mouth) and 26 region
polygons tagged with the action units whose muscle activity they cover.
Region geometry is hand-authored; eye interiors are deliberately left
uncovered so blinks do not register as movement, and paired regions carry
left/right (L/R) suffixed AU codes while mid-face regions carry plain codes.

Checks enforced before writing:
  * every polygon vertex lies strictly inside the control-point convex hull
  * independently rasterised regions are pairwise disjoint
  * no region pixel falls inside an eye opening
  * every region rasterises to a non-empty area at 256 and at 128 resolution

Run from the repository root:  python tools/make_atlas.py
"""

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from microspot.geometry.regions import _atlas_from_dict, rasterize_polygon  # noqa: E402
from microspot.geometry.warp import delaunay, barycentric  # noqa: E402

SIZE = 256
CX = 128.0

# face geometry constants (canonical space)
FACE_CENTER = (128.0, 140.0)
FACE_RX, FACE_RY = 88.0, 104.0
EYE_L = (86.0, 118.0)
EYE_R = (170.0, 118.0)
EYE_RX, EYE_RY = 20.0, 9.0
MOUTH_C = (128.0, 192.0)
MOUTH_RX, MOUTH_RY = 34.0, 13.0


def ellipse_points(cx, cy, rx, ry, n, start_deg=0.0, sweep_deg=360.0):
    angles = np.deg2rad(start_deg + np.linspace(0.0, sweep_deg, n, endpoint=sweep_deg < 360.0))
    return np.stack([cx + rx * np.cos(angles), cy + ry * np.sin(angles)], axis=1)


def mirror_x(points):
    pts = np.asarray(points, dtype=float).copy()
    pts[:, 0] = 2 * CX - pts[:, 0]
    return pts


def build_canonical_points():
    """83 control points: outline 19, brows 2x8, eyes 2x10, nose 10, mouth 18."""
    outline = ellipse_points(*FACE_CENTER, FACE_RX, FACE_RY, 19, start_deg=-90.0)

    brow_l_x = np.linspace(54.0, 116.0, 4)
    brow_top = np.stack([brow_l_x, np.array([94.0, 88.0, 86.0, 90.0])], axis=1)
    brow_bot = np.stack([brow_l_x[::-1], np.array([98.0, 94.0, 96.0, 102.0])[::-1]], axis=1)
    brow_l = np.vstack([brow_top, brow_bot])
    brow_r = mirror_x(brow_l)

    eye_l = ellipse_points(*EYE_L, EYE_RX, EYE_RY, 10)
    eye_r = ellipse_points(*EYE_R, EYE_RX, EYE_RY, 10)

    nose = np.array(
        [
            [121.0, 112.0], [135.0, 112.0],   # nose root sides
            [118.0, 132.0], [138.0, 132.0],   # bridge sides
            [104.0, 152.0], [152.0, 152.0],   # wings
            [116.0, 161.0], [128.0, 165.0], [140.0, 161.0],  # base
            [128.0, 146.0],                   # dorsum
        ]
    )

    mouth_outer = ellipse_points(*MOUTH_C, MOUTH_RX, MOUTH_RY, 12)
    mouth_inner = ellipse_points(*MOUTH_C, 20.0, 5.0, 6)
    mouth = np.vstack([mouth_outer, mouth_inner])

    pts = np.vstack([outline, brow_l, brow_r, eye_l, eye_r, nose, mouth])
    assert pts.shape == (83, 2), pts.shape
    return np.round(pts, 3)


def lid_band(eye_c, upper, rx_out, ry_out, rx_in, ry_in, n=7):
    """Annular band hugging the eye opening from above (upper) or below."""
    cx, cy = eye_c
    sign = -1.0 if upper else 1.0
    t = np.linspace(np.pi, 0.0, n)
    outer = np.stack([cx + rx_out * np.cos(t), cy + sign * ry_out * np.sin(t)], axis=1)
    inner = np.stack([cx + rx_in * np.cos(t[::-1]), cy + sign * ry_in * np.sin(t[::-1])], axis=1)
    return np.round(np.vstack([outer, inner]), 3)


def build_regions():
    inner_brow_l = [(92, 84), (112, 84), (112, 102), (92, 102)]
    outer_brow_l = [(56, 86), (90, 86), (90, 102), (60, 104)]
    glabella = [(114, 84), (142, 84), (138, 136), (118, 136)]
    upper_lid_l = lid_band(EYE_L, upper=True, rx_out=26, ry_out=15, rx_in=21, ry_in=10.5)
    lower_lid_l = lid_band(EYE_L, upper=False, rx_out=26, ry_out=15, rx_in=21, ry_in=10.5)
    nose_wing_l = [(104, 142), (124, 142), (124, 162), (104, 162)]
    cheek_l = [(48, 138), (82, 138), (82, 164), (54, 164)]
    nasolabial_l = [(86, 148), (102, 146), (100, 174), (84, 172)]
    lip_corner_l = [(80, 178), (102, 178), (102, 202), (84, 202)]
    upper_lip = [(106, 172), (150, 172), (150, 189), (106, 189)]
    lower_lip = [(106, 196), (150, 196), (150, 212), (106, 212)]
    chin = [(106, 216), (150, 216), (150, 236), (106, 236)]
    jaw_l = [(64, 206), (92, 206), (92, 226), (82, 226)]
    lower_cheek_l = [(58, 168), (78, 168), (78, 198), (62, 198)]
    forehead_l = [(82, 58), (126, 58), (126, 80), (74, 80)]

    def P(poly):
        return np.asarray(poly, dtype=float)

    regions = [
        (1, "inner_brow_left", ["1L", "4L"], P(inner_brow_l)),
        (2, "inner_brow_right", ["1R", "4R"], mirror_x(P(inner_brow_l))),
        (3, "outer_brow_left", ["2L"], P(outer_brow_l)),
        (4, "outer_brow_right", ["2R"], mirror_x(P(outer_brow_l))),
        (5, "glabella_nose_root", ["4", "9"], P(glabella)),
        (6, "upper_eyelid_left", ["5L"], upper_lid_l),
        (7, "upper_eyelid_right", ["5R"], mirror_x(upper_lid_l)),
        (8, "lower_eyelid_left", ["7L"], lower_lid_l),
        (9, "lower_eyelid_right", ["7R"], mirror_x(lower_lid_l)),
        (10, "nose_wing_left", ["38L", "39L"], P(nose_wing_l)),
        (11, "nose_wing_right", ["38R", "39R"], mirror_x(P(nose_wing_l))),
        (12, "upper_cheek_left", ["6L"], P(cheek_l)),
        (13, "upper_cheek_right", ["6R"], mirror_x(P(cheek_l))),
        (14, "nasolabial_left", ["10L", "11L"], P(nasolabial_l)),
        (15, "nasolabial_right", ["10R", "11R"], mirror_x(P(nasolabial_l))),
        (16, "lip_corner_left", ["12L", "13L", "14L", "15L", "20L"], P(lip_corner_l)),
        (17, "lip_corner_right", ["12R", "13R", "14R", "15R", "20R"], mirror_x(P(lip_corner_l))),
        (18, "upper_lip", ["10", "18", "22", "23"], P(upper_lip)),
        (19, "lower_lip", ["16", "24", "25", "28"], P(lower_lip)),
        (20, "chin", ["17"], P(chin)),
        (21, "jaw_left", ["26L", "31L"], P(jaw_l)),
        (22, "jaw_right", ["26R", "31R"], mirror_x(P(jaw_l))),
        (23, "lower_cheek_left", ["33L", "34L"], P(lower_cheek_l)),
        (24, "lower_cheek_right", ["33R", "34R"], mirror_x(P(lower_cheek_l))),
        (25, "forehead_left", ["1", "2"], P(forehead_l)),
        (26, "forehead_right", ["1", "2"], mirror_x(P(forehead_l))),
    ]
    return regions


def check_atlas(points, regions):
    mesh = delaunay(points)

    def inside_hull(p):
        for tri_idx in mesh.triangles:
            a, b, g = barycentric(p, mesh.vertices[tri_idx])
            if min(a, b, g) >= 1e-12:
                return True
        return False

    for rid, name, _, poly in regions:
        for v in poly:
            assert inside_hull(v), f"region {rid} ({name}) vertex {v} outside hull"

    # pairwise disjointness + eye exclusion via independent rasterisation
    rasters = {}
    for rid, name, _, poly in regions:
        r = rasterize_polygon(poly, (SIZE, SIZE), 1)
        assert r.sum() > 0, f"region {rid} ({name}) empty at {SIZE}"
        rasters[rid] = r.astype(bool)
    ids = sorted(rasters)
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            overlap = int((rasters[a] & rasters[b]).sum())
            assert overlap == 0, f"regions {a} and {b} overlap on {overlap} px"

    yy, xx = np.mgrid[0:SIZE, 0:SIZE]
    for cx, cy in (EYE_L, EYE_R):
        eye = ((xx - cx) / EYE_RX) ** 2 + ((yy - cy) / EYE_RY) ** 2 <= 1.0
        for rid in ids:
            bad = int((rasters[rid] & eye).sum())
            assert bad == 0, f"region {rid} covers {bad} eye px"

    # still usable at half resolution
    for rid, name, _, poly in regions:
        r = rasterize_polygon(poly * 0.5, (SIZE // 2, SIZE // 2), 1)
        assert r.sum() > 0, f"region {rid} ({name}) empty at {SIZE // 2}"

    areas = {rid: int(rasters[rid].sum()) for rid in ids}
    return areas


def main():
    points = build_canonical_points()
    regions = build_regions()
    areas = check_atlas(points, regions)

    payload = {
        "version": "1",
        "canonical_size": [SIZE, SIZE],
        "canonical_points": [[float(x), float(y)] for x, y in points],
        "regions": [
            {
                "region_id": rid,
                "name": name,
                "au_codes": aus,
                "polygon": [[float(x), float(y)] for x, y in poly],
            }
            for rid, name, aus, poly in regions
        ],
    }
    out = Path(__file__).resolve().parents[1] / "src" / "microspot" / "data" / "facs26_atlas.json"
    out.write_text(json.dumps(payload, indent=1))

    atlas = _atlas_from_dict(json.loads(out.read_text()), source=str(out))
    unique = {r.region_id: atlas.unique_au_for_region(r.region_id) for r in atlas.regions}
    print(f"wrote {out}")
    print(f"areas at {SIZE}: min={min(areas.values())} max={max(areas.values())}")
    print("uniquely addressable regions:", sorted(r for r, u in unique.items() if u))
    print("shared-AU regions:", sorted(r for r, u in unique.items() if not u))


if __name__ == "__main__":
    main()
