"""The per-region, per-frame histogram container and its serialisation."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

MAGIC = b"FCB1"


class PlaneSelection(Enum):
    """Which of the three orthogonal video-volume planes to keep.

    XTYT concatenates the two temporal planes; ALL concatenates all three.
    Concatenation order is always XY, XT, YT.
    """

    XY = "XY"
    XT = "XT"
    YT = "YT"
    XTYT = "XTYT"
    ALL = "ALL"

    @property
    def planes(self) -> tuple[str, ...]:
        return {
            PlaneSelection.XY: ("XY",),
            PlaneSelection.XT: ("XT",),
            PlaneSelection.YT: ("YT",),
            PlaneSelection.XTYT: ("XT", "YT"),
            PlaneSelection.ALL: ("XY", "XT", "YT"),
        }[self]


@dataclass(frozen=True)
class FeatureCube:
    """Histograms per (region, frame), concatenated over the selected planes.

    ``data`` has shape (n_regions, n_frames, len(planes) * bins_per_plane)
    and is already area-normalised (each region's histograms divided by its
    pixel count, so differently sized regions compare fairly).
    """

    descriptor: str
    planes: tuple[str, ...]
    bins_per_plane: int
    region_ids: tuple[int, ...]
    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        expected = (len(self.region_ids), data.shape[1], len(self.planes) * self.bins_per_plane)
        if data.shape != expected:
            raise ValueError(f"data shape {data.shape} != expected {expected}")
        if data.size and float(data.min()) < 0:
            raise ValueError("histogram entries must be non-negative")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "planes", tuple(self.planes))
        object.__setattr__(self, "region_ids", tuple(int(r) for r in self.region_ids))

    @property
    def n_frames(self) -> int:
        return self.data.shape[1]

    @property
    def n_regions(self) -> int:
        return self.data.shape[0]

    def region_series(self, region_id: int) -> np.ndarray:
        """(n_frames, bins) histogram series of one region."""
        return self.data[self.region_ids.index(region_id)]

    def compatible_with(self, other: "FeatureCube") -> bool:
        return (
            self.descriptor == other.descriptor
            and self.planes == other.planes
            and self.bins_per_plane == other.bins_per_plane
            and self.region_ids == other.region_ids
        )


def save_cube(cube: FeatureCube, path: str | Path) -> None:
    """Write the binary container: magic, JSON header, float64 payload."""
    header = json.dumps(
        {
            "descriptor": cube.descriptor,
            "planes": list(cube.planes),
            "bins_per_plane": cube.bins_per_plane,
            "region_ids": list(cube.region_ids),
            "n_frames": cube.n_frames,
            "shape": list(cube.data.shape),
        },
        sort_keys=True,
    ).encode()
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(cube.data).tobytes())


def load_cube(path: str | Path) -> FeatureCube:
    with Path(path).open("rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a feature-cube file")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len))
        payload = fh.read()
    shape = tuple(header["shape"])
    data = np.frombuffer(payload, dtype=np.float64).reshape(shape)
    return FeatureCube(
        descriptor=header["descriptor"],
        planes=tuple(header["planes"]),
        bins_per_plane=int(header["bins_per_plane"]),
        region_ids=tuple(header["region_ids"]),
        data=data.copy(),
    )


def export_cube_text(cube: FeatureCube, path: str | Path) -> None:
    """Lossless JSON export for debugging; floats round-trip exactly."""
    payload = {
        "descriptor": cube.descriptor,
        "planes": list(cube.planes),
        "bins_per_plane": cube.bins_per_plane,
        "region_ids": list(cube.region_ids),
        "data": cube.data.tolist(),
    }
    Path(path).write_text(json.dumps(payload))


def import_cube_text(path: str | Path) -> FeatureCube:
    raw = json.loads(Path(path).read_text())
    return FeatureCube(
        descriptor=raw["descriptor"],
        planes=tuple(raw["planes"]),
        bins_per_plane=int(raw["bins_per_plane"]),
        region_ids=tuple(raw["region_ids"]),
        data=np.asarray(raw["data"], dtype=np.float64),
    )
