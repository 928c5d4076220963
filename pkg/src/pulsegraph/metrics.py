"""HR error metrics and Bland-Altman statistics."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .signal import pearson

METRIC_FIELDS = ("mae_bpm", "rmse_bpm", "mape_pct", "pearson_r")
PER_CLIP_FIELDS = ("clip_id", "hr_gt_bpm", "hr_pred_bpm")


@dataclass
class MetricsReport:
    mae_bpm: float
    rmse_bpm: float
    mape_pct: float
    pearson_r: float | None     # None when either side is constant or N < 2
    per_clip: list = field(default_factory=list)

    def as_rows(self) -> list[tuple[str, str]]:
        rows = [(k, repr(float(getattr(self, k)))) for k in METRIC_FIELDS[:3]]
        rows.append(("pearson_r", "" if self.pearson_r is None else repr(float(self.pearson_r))))
        rows.append(("n_clips", str(len(self.per_clip))))
        return rows


def compute_metrics(gt, pred, clip_ids=None) -> MetricsReport:
    y = np.asarray(gt, dtype=np.float64)
    yhat = np.asarray(pred, dtype=np.float64)
    if y.size == 0:
        raise ValueError("no prediction pairs")
    if y.shape != yhat.shape or y.ndim != 1:
        raise ValueError("gt and pred must be equal-length 1-D sequences")
    err = y - yhat
    mae = float(np.mean(np.abs(err)))
    rmse = float(np.sqrt(np.mean(err ** 2)))
    nz = y != 0
    mape = float(100.0 * np.mean(np.abs(err[nz] / y[nz]))) if nz.any() else float("nan")
    try:
        r = pearson(y, yhat)
    except ValueError:
        r = None
    ids = clip_ids if clip_ids is not None else [str(i) for i in range(y.size)]
    per_clip = [(cid, float(a), float(b)) for cid, a, b in zip(ids, y, yhat)]
    return MetricsReport(mae, rmse, mape, r, per_clip)


@dataclass(frozen=True)
class BlandAltman:
    rows: list          # (mean, diff) per pair
    bias: float
    loa_low: float
    loa_high: float


def bland_altman(gt, pred) -> BlandAltman:
    """Per-pair (mean, pred - gt); limits are bias +/- 1.96 sample SD of the differences."""
    y = np.asarray(gt, dtype=np.float64)
    yhat = np.asarray(pred, dtype=np.float64)
    if y.size < 2 or y.shape != yhat.shape:
        raise ValueError("Bland-Altman needs at least two equal-length pairs")
    diff = yhat - y
    mean = (yhat + y) / 2.0
    bias = float(diff.mean())
    sd = float(diff.std(ddof=1))
    return BlandAltman(list(zip(mean.tolist(), diff.tolist())), bias, bias - 1.96 * sd, bias + 1.96 * sd)


def write_metrics(path, report: MetricsReport) -> None:
    """``metric,value`` summary at ``path`` plus ``<stem>_per_clip.csv`` next to it."""
    from pathlib import Path

    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "value"])
        w.writerows(report.as_rows())
    with open(path.with_name(path.stem + "_per_clip.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PER_CLIP_FIELDS)
        for cid, a, b in report.per_clip:
            w.writerow([cid, repr(a), repr(b)])


def write_bland_altman(path, ba: BlandAltman) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mean", "diff"])
        for m, d in ba.rows:
            w.writerow([repr(m), repr(d)])
    summary = str(path) + ".summary.csv"
    with open(summary, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bias", "loa_low", "loa_high"])
        w.writerow([repr(ba.bias), repr(ba.loa_low), repr(ba.loa_high)])
