"""The 26-region face atlas and its per-subject rasterisation.

The atlas is pure data: 83 canonical control points plus 26 polygons, each
tagged with the action-unit codes whose muscle activity it covers.  Fitting
warps the atlas polygons onto a subject's landmarks (never the face onto the
atlas, which would distort the very motion being measured) and rasterises
them into a label image.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .. import accel
from ..ingest import LandmarkSet, ValidationError, au_number, au_suffix
from . import _kernels
from .warp import TriangleMesh, delaunay, map_points

N_REGIONS = 26

DEFAULT_ATLAS_RESOURCE = "facs26_atlas.json"


class AtlasError(ValueError):
    """The atlas file is malformed or internally inconsistent."""


class MaskFitError(ValueError):
    """A region could not be fitted to the subject's face."""


@dataclass(frozen=True)
class Region:
    """One atlas region: id, covered AU codes, polygon in canonical space."""

    region_id: int
    name: str
    au_codes: tuple[str, ...]
    polygon: np.ndarray

    def __post_init__(self):
        poly = np.ascontiguousarray(self.polygon, dtype=np.float64)
        poly.flags.writeable = False
        object.__setattr__(self, "polygon", poly)
        object.__setattr__(self, "au_codes", tuple(self.au_codes))


@dataclass(frozen=True)
class RegionAtlas:
    """Canonical control points plus the 26 region polygons."""

    version: str
    canonical_points: np.ndarray
    regions: tuple[Region, ...]

    def __post_init__(self):
        pts = np.ascontiguousarray(self.canonical_points, dtype=np.float64)
        pts.flags.writeable = False
        object.__setattr__(self, "canonical_points", pts)
        object.__setattr__(self, "regions", tuple(self.regions))

    def region(self, region_id: int) -> Region:
        for r in self.regions:
            if r.region_id == region_id:
                return r
        raise KeyError(f"no region {region_id} in atlas")

    def au_coverage(self) -> set[str]:
        return {code for r in self.regions for code in r.au_codes}

    def regions_for_au(self, gt_code: str) -> list[int]:
        """Region ids whose AU codes match a ground-truth AU token.

        A ground-truth code matches a region code when the AU numbers agree
        and the ground-truth code either carries no laterality suffix
        (bilateral activation reaches both sides) or carries the identical
        suffix.
        """
        n, s = au_number(gt_code), au_suffix(gt_code)
        hits = []
        for r in self.regions:
            for code in r.au_codes:
                if au_number(code) == n and (s == "" or au_suffix(code) == s):
                    hits.append(r.region_id)
                    break
        return hits

    def unique_au_for_region(self, region_id: int) -> str | None:
        """An AU code that maps to this region and no other, if one exists."""
        for code in self.region(region_id).au_codes:
            if self.regions_for_au(code) == [region_id]:
                return code
        return None


@dataclass(frozen=True)
class RegionMask:
    """Per-clip rasterisation of the atlas: label image plus pixel areas.

    ``labels`` holds region ids (0 = background); ``areas[r]`` is the pixel
    count of region r (index 0 unused).
    """

    labels: np.ndarray
    areas: np.ndarray

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        areas = np.ascontiguousarray(self.areas, dtype=np.int64)
        labels.flags.writeable = False
        areas.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "areas", areas)

    @property
    def n_regions(self) -> int:
        return len(self.areas) - 1


def _polygon_is_simple(poly: np.ndarray) -> bool:
    """Check for self-intersection by brute force over edge pairs."""
    n = len(poly)

    def segs_cross(p1, p2, p3, p4):
        def orient(a, b, c):
            v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            return int(v > 1e-12) - int(v < -1e-12)

        return (
            orient(p1, p2, p3) != orient(p1, p2, p4)
            and orient(p3, p4, p1) != orient(p3, p4, p2)
        )

    for i in range(n):
        a1, a2 = poly[i], poly[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue  # shared endpoint
            if segs_cross(a1, a2, poly[j], poly[(j + 1) % n]):
                return False
    return True


def load_atlas(path: str | Path) -> RegionAtlas:
    """Load and validate an atlas file."""
    raw = json.loads(Path(path).read_text())
    return _atlas_from_dict(raw, source=str(path))


def _atlas_from_dict(raw: dict, source: str) -> RegionAtlas:
    if "version" not in raw:
        raise AtlasError(f"{source}: missing version field")
    points = np.asarray(raw.get("canonical_points", []), dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise AtlasError(f"{source}: canonical_points must be (n, 2)")
    regions_raw = raw.get("regions", [])
    if len(regions_raw) != N_REGIONS:
        raise AtlasError(
            f"{source}: expected {N_REGIONS} regions, found {len(regions_raw)}"
        )
    regions = []
    for entry in regions_raw:
        poly = np.asarray(entry["polygon"], dtype=np.float64)
        if len(poly) < 3:
            raise AtlasError(f"{source}: region {entry['region_id']} polygon too small")
        if not _polygon_is_simple(poly):
            raise AtlasError(
                f"{source}: region {entry['region_id']} polygon self-intersects"
            )
        regions.append(
            Region(
                region_id=int(entry["region_id"]),
                name=str(entry.get("name", f"region_{entry['region_id']}")),
                au_codes=tuple(entry["au_codes"]),
                polygon=poly,
            )
        )
    ids = sorted(r.region_id for r in regions)
    if ids != list(range(1, N_REGIONS + 1)):
        raise AtlasError(f"{source}: region ids must be 1..{N_REGIONS}, got {ids}")
    regions.sort(key=lambda r: r.region_id)
    return RegionAtlas(
        version=str(raw["version"]), canonical_points=points, regions=tuple(regions)
    )


def default_atlas() -> RegionAtlas:
    """The atlas bundled with the package."""
    ref = resources.files("microspot.data").joinpath(DEFAULT_ATLAS_RESOURCE)
    return _atlas_from_dict(json.loads(ref.read_text()), source=DEFAULT_ATLAS_RESOURCE)


def rasterize_polygon(polygon: np.ndarray, shape: tuple[int, int],
                      region_id: int = 1, labels: np.ndarray | None = None) -> np.ndarray:
    """Rasterise one polygon into a label image.

    A pixel belongs to the polygon when its centre (integer coordinates) is
    inside under the even-odd rule.  Already-labelled pixels are never
    overwritten, so filling in ascending region-id order resolves boundary
    ties in favour of the lower id.
    """
    if labels is None:
        labels = np.zeros(shape, dtype=np.int32)
    poly = np.ascontiguousarray(polygon, dtype=np.float64)
    if accel.numba_enabled():
        _kernels.fill_polygon_numba(labels, poly, region_id)
    else:
        _kernels.fill_polygon_numpy(labels, poly, region_id)
    return labels


def fit_region_mask(atlas: RegionAtlas, landmarks: LandmarkSet,
                    frame_dims: tuple[int, int]) -> RegionMask:
    """Warp the atlas polygons onto a subject's landmarks and rasterise them.

    ``frame_dims`` is (width, height).  Raises MaskFitError when any region
    rasterises to zero pixels, and ValidationError for landmarks outside the
    frame.
    """
    w, h = frame_dims
    pts = landmarks.points
    if pts.shape != atlas.canonical_points.shape:
        raise ValidationError(
            f"landmark count {pts.shape[0]} does not match atlas "
            f"({atlas.canonical_points.shape[0]})"
        )
    if (
        pts[:, 0].min() < 0
        or pts[:, 1].min() < 0
        or pts[:, 0].max() > w - 1
        or pts[:, 1].max() > h - 1
    ):
        raise ValidationError("landmark outside frame bounds")

    mesh = delaunay(atlas.canonical_points)
    labels = np.zeros((h, w), dtype=np.int32)
    for region in atlas.regions:  # ascending id: boundary ties go to lower id
        mapped = map_points(region.polygon, mesh, pts)
        # snap away float fuzz so an identity warp rasterises identically
        mapped = np.round(mapped, 9)
        rasterize_polygon(mapped, (h, w), region.region_id, labels)

    areas = np.bincount(labels.ravel(), minlength=N_REGIONS + 1)[: N_REGIONS + 1]
    for region in atlas.regions:
        if areas[region.region_id] == 0:
            raise MaskFitError(
                f"region {region.region_id} ({region.name}) rasterised to zero pixels"
            )
    return RegionMask(labels=labels, areas=areas)


def canonical_mask(atlas: RegionAtlas, frame_dims: tuple[int, int]) -> RegionMask:
    """Rasterise the atlas at its canonical coordinates (no warping)."""
    w, h = frame_dims
    labels = np.zeros((h, w), dtype=np.int32)
    for region in atlas.regions:
        rasterize_polygon(region.polygon, (h, w), region.region_id, labels)
    areas = np.bincount(labels.ravel(), minlength=N_REGIONS + 1)[: N_REGIONS + 1]
    return RegionMask(labels=labels, areas=areas)


class FileLandmarkProvider:
    """Default landmark provider: reads the landmark JSON stored with a clip.

    The provider interface is a single method ``landmarks_for(clip_dir)``;
    alternative implementations (e.g. wrapping an automatic detector) can be
    slotted in anywhere a provider is accepted.
    """

    def __init__(self, filename: str = "landmarks.json"):
        self.filename = filename

    def landmarks_for(self, clip_dir: str | Path) -> LandmarkSet:
        from ..ingest import load_landmarks

        return load_landmarks(Path(clip_dir) / self.filename)
