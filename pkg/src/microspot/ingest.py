"""Loaders for frame sequences, facial landmarks, and FACS ground-truth files.

All loaders are pure functions of their inputs and return immutable values
(frame buffers are marked read-only), so they are safe to call concurrently
on distinct paths and to share across threads.
"""

from __future__ import annotations

import csv
import json
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

N_LANDMARKS = 83

RASTER_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".pgm")

# Rec. 601 luma weights; descriptors operate on intensity only.
_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float64)

_AU_TOKEN = re.compile(r"^(?:AU)?(\d+)([A-Z]*)$", re.IGNORECASE)


class LoadError(Exception):
    """An input file or directory could not be ingested."""


class SchemaError(LoadError):
    """A structured input file does not match its documented schema."""


class ValidationError(LoadError):
    """Parsed content violates a documented invariant."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class FrameSequence:
    """An ordered stack of grayscale frames with capture metadata.

    ``frames`` has shape ``(n_frames, height, width)`` with intensities in
    [0, 1].  ``neutral_pad`` records how many neutral frames were prepended
    and appended to the movement; it is metadata only and all frames are
    treated uniformly downstream.
    """

    frames: np.ndarray
    fps: float
    subject_id: str = ""
    clip_id: str = ""
    neutral_pad: int = 0

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 3:
            raise ValidationError(f"frames must be (n, h, w), got shape {frames.shape}")
        if frames.shape[0] < 1:
            raise ValidationError("sequence must contain at least one frame")
        if self.fps <= 0:
            raise ValidationError(f"fps must be positive, got {self.fps}")
        if self.neutral_pad < 0:
            raise ValidationError("neutral_pad must be >= 0")
        lo, hi = float(frames.min()), float(frames.max())
        if lo < -1e-9 or hi > 1 + 1e-9:
            raise ValidationError(f"intensities outside [0, 1]: min={lo}, max={hi}")
        object.__setattr__(self, "frames", _freeze(np.clip(frames, 0.0, 1.0)))

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    def with_frames(self, frames: np.ndarray) -> "FrameSequence":
        """New sequence sharing this one's metadata."""
        return FrameSequence(
            frames=frames,
            fps=self.fps,
            subject_id=self.subject_id,
            clip_id=self.clip_id,
            neutral_pad=self.neutral_pad,
        )


@dataclass(frozen=True)
class LandmarkSet:
    """83 ordered (x, y) facial control points for one annotated frame."""

    points: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.shape != (N_LANDMARKS, 2):
            raise SchemaError(
                f"expected {N_LANDMARKS} points, found "
                f"{points.shape[0] if points.ndim == 2 else points.shape}"
            )
        object.__setattr__(self, "points", _freeze(points))


@dataclass(frozen=True)
class GroundTruthMovement:
    """One FACS-coded movement: temporal phase frames plus its AU codes."""

    clip_id: str
    onset: int
    apex: int
    offset: int
    au_codes: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not (self.onset <= self.apex <= self.offset):
            raise ValidationError(
                f"clip {self.clip_id}: require onset <= apex <= offset, "
                f"got ({self.onset}, {self.apex}, {self.offset})"
            )
        if not self.au_codes:
            raise ValidationError(f"clip {self.clip_id}: au_codes must be non-empty")
        object.__setattr__(self, "au_codes", tuple(self.au_codes))


def parse_au_token(token: str) -> str | None:
    """Canonicalize an AU token like 'AU13' or 'au12l' to '13' / '12L'.

    Returns None when the token is not a recognisable AU code.
    """
    m = _AU_TOKEN.match(token.strip())
    if m is None:
        return None
    number = int(m.group(1))
    suffix = m.group(2).upper()
    return f"{number}{suffix}"


def au_number(code: str) -> int:
    """Numeric part of a canonical AU code ('12L' -> 12)."""
    m = _AU_TOKEN.match(code)
    if m is None:
        raise ValueError(f"not an AU code: {code!r}")
    return int(m.group(1))


def au_suffix(code: str) -> str:
    """Laterality/intensity suffix of a canonical AU code ('12L' -> 'L')."""
    m = _AU_TOKEN.match(code)
    if m is None:
        raise ValueError(f"not an AU code: {code!r}")
    return m.group(2).upper()


def _numeric_key(path: Path) -> tuple:
    m = re.search(r"(\d+)", path.stem)
    if m is None:
        raise LoadError(f"frame filename has no numeric index: {path.name}")
    return (int(m.group(1)), path.name)


def _to_gray(img: Image.Image) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim == 2:
        gray = arr.astype(np.float64)
    elif arr.ndim == 3:
        gray = arr[..., :3].astype(np.float64) @ _LUMA_WEIGHTS
    else:
        raise LoadError(f"unsupported image layout with shape {arr.shape}")
    if arr.dtype == np.uint8:
        return gray / 255.0
    if arr.dtype == np.uint16:
        return gray / 65535.0
    # float inputs are assumed already normalised
    return gray


def load_manifest(path: str | Path) -> dict:
    """Read a sequence manifest: fps, subject_id, clip_id, neutral_pad."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise LoadError(f"cannot read manifest {path}: {exc}") from exc
    required = {"fps", "subject_id", "clip_id", "neutral_pad"}
    missing = required - raw.keys()
    if missing:
        raise SchemaError(f"manifest {path} missing keys: {sorted(missing)}")
    return raw


def load_sequence(path: str | Path, manifest: dict) -> FrameSequence:
    """Load a directory of numerically ordered still images as one sequence.

    Frames are sorted by the numeric index embedded in their filenames, so
    the result is independent of directory listing order.  8-bit inputs are
    normalised to [0, 1]; colour inputs are reduced to luma.
    """
    directory = Path(path)
    if not directory.is_dir():
        raise LoadError(f"not a directory: {directory}")
    files = [
        p
        for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in RASTER_EXTENSIONS
    ]
    if not files:
        raise LoadError(f"no frames found in {directory}")
    files.sort(key=_numeric_key)

    frames = []
    shape = None
    for p in files:
        try:
            with Image.open(p) as img:
                gray = _to_gray(img)
        except (OSError, SyntaxError) as exc:
            raise LoadError(f"unreadable image {p.name}: {exc}") from exc
        if shape is None:
            shape = gray.shape
        elif gray.shape != shape:
            raise LoadError(
                f"frame size mismatch: {p.name} is {gray.shape[::-1]}, "
                f"expected {shape[::-1]}"
            )
        frames.append(gray)

    return FrameSequence(
        frames=np.stack(frames),
        fps=float(manifest["fps"]),
        subject_id=str(manifest["subject_id"]),
        clip_id=str(manifest["clip_id"]),
        neutral_pad=int(manifest["neutral_pad"]),
    )


def load_landmarks(path: str | Path) -> LandmarkSet:
    """Parse the landmark JSON: {"frame_index": int, "points": [[x, y] * 83]}."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise LoadError(f"cannot read landmarks {path}: {exc}") from exc
    if not isinstance(raw, dict) or "points" not in raw:
        raise SchemaError(f"landmark file {path} missing 'points'")
    points = raw["points"]
    if len(points) != N_LANDMARKS:
        raise SchemaError(f"expected {N_LANDMARKS} points, found {len(points)}")
    return LandmarkSet(points=np.asarray(points, dtype=np.float64),
                       frame_index=int(raw.get("frame_index", 0)))


GROUND_TRUTH_HEADER = ("clip_id", "onset", "apex", "offset", "aus")


def load_ground_truth(path: str | Path) -> list[GroundTruthMovement]:
    """Parse the annotation CSV: clip_id,onset,apex,offset,aus ('AU4+AU7').

    Unknown AU tokens are retained verbatim with a warning; structural
    violations (onset after offset, bad frame numbers) raise with the
    offending row number.
    """
    path = Path(path)
    movements: list[GroundTruthMovement] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows:
        return movements
    header = tuple(h.strip() for h in rows[0])
    if header != GROUND_TRUTH_HEADER:
        raise SchemaError(
            f"{path}: expected header {','.join(GROUND_TRUTH_HEADER)}, "
            f"got {','.join(header)}"
        )
    for row_no, row in enumerate(rows[1:], start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 5:
            raise SchemaError(f"{path}: row {row_no}: expected 5 fields, got {len(row)}")
        clip_id, onset_s, apex_s, offset_s, aus_s = (c.strip() for c in row)
        try:
            onset, apex, offset = int(onset_s), int(apex_s), int(offset_s)
        except ValueError as exc:
            raise ValidationError(f"{path}: row {row_no}: non-integer frame index") from exc
        if onset > offset:
            raise ValidationError(f"{path}: row {row_no}: onset after offset")
        if not (onset <= apex <= offset):
            raise ValidationError(f"{path}: row {row_no}: apex outside [onset, offset]")
        codes = []
        for tok in aus_s.split("+"):
            tok = tok.strip()
            if not tok:
                continue
            canon = parse_au_token(tok)
            if canon is None:
                warnings.warn(f"{path}: row {row_no}: unknown AU token {tok!r}", stacklevel=2)
                codes.append(tok)
            else:
                codes.append(canon)
        if not codes:
            raise ValidationError(f"{path}: row {row_no}: empty AU list")
        movements.append(
            GroundTruthMovement(clip_id=clip_id, onset=onset, apex=apex,
                                offset=offset, au_codes=tuple(codes))
        )
    return movements


def save_ground_truth(movements: list[GroundTruthMovement], path: str | Path) -> None:
    """Write movements back to the annotation CSV format (round-trip safe)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GROUND_TRUTH_HEADER)
        for m in movements:
            # unknown tokens were retained verbatim on load; keep them that way
            aus = "+".join(
                f"AU{c}" if parse_au_token(c) is not None else c for c in m.au_codes
            )
            writer.writerow([m.clip_id, m.onset, m.apex, m.offset, aus])


def save_landmarks(landmarks: LandmarkSet, path: str | Path) -> None:
    """Write a LandmarkSet to the landmark JSON format."""
    payload = {
        "frame_index": landmarks.frame_index,
        "points": [[float(x), float(y)] for x, y in landmarks.points],
    }
    Path(path).write_text(json.dumps(payload))


def save_manifest(manifest: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(manifest, sort_keys=True, indent=2))
