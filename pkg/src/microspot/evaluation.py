"""Scoring of spotting results against region-level FACS ground truth.

Ground-truth AU codes are mapped to atlas regions; a detection counts when a
peak's apex lands inside the coded movement window of a positive region.
Sweeping the top-R region count produces ROC curves and their AUC.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry.regions import N_REGIONS, RegionAtlas
from .ingest import GroundTruthMovement
from .spotting import SpottingResult


@dataclass(frozen=True)
class RegionGroundTruth:
    """Per-clip region truth: which regions move, and in which frame window."""

    clip_id: str
    windows: dict[int, tuple[int, int]] = field(default_factory=dict)

    def positive(self, region_id: int) -> bool:
        return region_id in self.windows


def region_ground_truth(
    clip_id: str,
    movements: list[GroundTruthMovement],
    atlas: RegionAtlas,
    n_frames: int | None = None,
) -> RegionGroundTruth:
    """Derive per-region truth for one clip from its AU-coded movements.

    A region is positive when any coded AU maps to it; overlapping movements
    merge into the widest window.  AU tokens outside the atlas coverage are
    reported (they cannot be scored against any region).
    """
    windows: dict[int, tuple[int, int]] = {}
    for m in movements:
        if m.clip_id != clip_id:
            continue
        if n_frames is not None and m.offset >= n_frames:
            raise ValueError(
                f"clip {clip_id}: ground-truth offset {m.offset} outside clip "
                f"of {n_frames} frames"
            )
        for code in m.au_codes:
            try:
                regions = atlas.regions_for_au(code)
            except ValueError:
                regions = []
            if not regions:
                warnings.warn(
                    f"clip {clip_id}: AU token {code!r} matches no atlas region",
                    stacklevel=2,
                )
                continue
            for rid in regions:
                if rid in windows:
                    lo, hi = windows[rid]
                    windows[rid] = (min(lo, m.onset), max(hi, m.offset))
                else:
                    windows[rid] = (m.onset, m.offset)
    return RegionGroundTruth(clip_id=clip_id, windows=windows)


@dataclass
class ConfusionCounts:
    """Region-level confusion counts accumulated over clips.

    One outcome per (clip, region): TP for a positive region with an apex
    inside its window, FN for a positive region without one, FP for a
    negative region with any detection, TN otherwise.  A positive region
    whose detections all miss the window additionally contributes one FP per
    stray peak, so tp+fp+fn+tn can exceed clips x regions by exactly those
    strays.
    """

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            fn=self.fn + other.fn,
            tn=self.tn + other.tn,
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def spot_check(result: SpottingResult, gt: RegionGroundTruth) -> ConfusionCounts:
    """Score one clip's detections against its region ground truth."""
    if result.clip_id != gt.clip_id:
        raise ValueError(f"clip mismatch: result {result.clip_id!r} vs gt {gt.clip_id!r}")
    by_region: dict[int, list] = {}
    for p in result.peaks:
        by_region.setdefault(p.region_id, []).append(p)

    counts = ConfusionCounts()
    for rid in range(1, N_REGIONS + 1):
        peaks = by_region.get(rid, [])
        if gt.positive(rid):
            lo, hi = gt.windows[rid]
            in_window = [p for p in peaks if lo <= p.apex <= hi]
            strays = [p for p in peaks if not (lo <= p.apex <= hi)]
            if in_window:
                counts.tp += 1  # surplus in-window peaks are not extra credit
            else:
                counts.fn += 1
            counts.fp += len(strays)
        else:
            if peaks:
                counts.fp += 1
            else:
                counts.tn += 1
    return counts


def metrics(counts: ConfusionCounts) -> dict[str, float | None]:
    """Recall, precision, F-measure, accuracy, FPR; 0/0 reported as None."""

    def ratio(num: int, den: int) -> float | None:
        return num / den if den else None

    recall = ratio(counts.tp, counts.tp + counts.fn)
    precision = ratio(counts.tp, counts.tp + counts.fp)
    if recall is None or precision is None or (precision + recall) == 0:
        f_measure = None
    else:
        f_measure = 2 * precision * recall / (precision + recall)
    return {
        "recall": recall,
        "precision": precision,
        "f_measure": f_measure,
        "accuracy": ratio(counts.tp + counts.tn, counts.total),
        "fpr": ratio(counts.fp, counts.fp + counts.tn),
    }


@dataclass(frozen=True)
class RocCurve:
    """(FPR, TPR) per swept R plus the trapezoidal area under the curve."""

    rs: tuple[int, ...]
    points: tuple[tuple[float, float], ...]
    auc: float


def roc_auc(points: list[tuple[float, float]]) -> float:
    """Trapezoidal AUC over the points augmented with (0,0) and (1,1)."""
    pts = sorted(set(points) | {(0.0, 0.0), (1.0, 1.0)})
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    return float(np.trapezoid(ys, xs))


def roc_sweep(
    run_for_r,
    rs: tuple[int, ...] = tuple(range(2, 27, 2)),
) -> RocCurve:
    """Build a ROC curve by sweeping the top-R region count.

    ``run_for_r(r)`` must return accumulated ConfusionCounts for that R.
    Points with undefined rates (no positives or no negatives at all) raise,
    since the sweep cannot be interpreted.
    """
    points = []
    for r in rs:
        counts = run_for_r(r)
        m = metrics(counts)
        if m["recall"] is None or m["fpr"] is None:
            raise ValueError(f"ROC undefined at R={r}: no positives or no negatives")
        points.append((m["fpr"], m["recall"]))
    return RocCurve(rs=tuple(rs), points=tuple(points), auc=roc_auc(points))


def _fmt(value: float | None) -> str:
    return "undef" if value is None else f"{value:.4f}"


def report(
    out_dir: str | Path,
    sections: list[dict],
    config_summary: dict | None = None,
) -> Path:
    """Write the evaluation report: text tables plus plot-ready CSVs.

    Each section is one descriptor/plane cell:
      {"label": str, "counts": ConfusionCounts, "metrics": {...},
       "roc": RocCurve | None}
    Floats are displayed to 4 decimals; a JSON sidecar keeps full precision
    so recomputation from the report is exact.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    lines = ["micro-movement evaluation report", ""]
    if config_summary:
        lines.append("configuration:")
        for key in sorted(config_summary):
            lines.append(f"  {key} = {config_summary[key]}")
        lines.append("")
    lines.append("AUC integration: trapezoid over R-sweep points augmented with (0,0), (1,1)")
    lines.append("")

    header = f"{'feature':<24} {'recall':>8} {'precision':>10} {'f_measure':>10} {'accuracy':>9} {'auc':>7}"
    lines.append(header)
    lines.append("-" * len(header))
    if not sections:
        lines.append("(no detections: empty result set)")
    for s in sections:
        m = s["metrics"]
        auc = _fmt(s["roc"].auc) if s.get("roc") else "-"
        lines.append(
            f"{s['label']:<24} {_fmt(m['recall']):>8} {_fmt(m['precision']):>10} "
            f"{_fmt(m['f_measure']):>10} {_fmt(m['accuracy']):>9} {auc:>7}"
        )
    report_path = out_dir / "report.txt"
    report_path.write_text("\n".join(lines) + "\n")

    roc_lines = ["label,R,fpr,tpr"]
    for s in sections:
        if s.get("roc"):
            for r, (fpr, tpr) in zip(s["roc"].rs, s["roc"].points):
                roc_lines.append(f"{s['label']},{r},{fpr:.4f},{tpr:.4f}")
    (out_dir / "roc.csv").write_text("\n".join(roc_lines) + "\n")

    metric_lines = ["label,tp,fp,fn,tn,recall,precision,f_measure,accuracy,fpr"]
    for s in sections:
        c, m = s["counts"], s["metrics"]
        metric_lines.append(
            f"{s['label']},{c.tp},{c.fp},{c.fn},{c.tn},"
            f"{_fmt(m['recall'])},{_fmt(m['precision'])},{_fmt(m['f_measure'])},"
            f"{_fmt(m['accuracy'])},{_fmt(m['fpr'])}"
        )
    (out_dir / "metrics.csv").write_text("\n".join(metric_lines) + "\n")

    sidecar = []
    for s in sections:
        c = s["counts"]
        entry = {
            "label": s["label"],
            "counts": {"tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn},
            "metrics": s["metrics"],
        }
        if s.get("roc"):
            entry["roc"] = {
                "rs": list(s["roc"].rs),
                "points": [list(p) for p in s["roc"].points],
                "auc": s["roc"].auc,
            }
        sidecar.append(entry)
    (out_dir / "report.json").write_text(json.dumps(sidecar, indent=1, sort_keys=True))
    return report_path
