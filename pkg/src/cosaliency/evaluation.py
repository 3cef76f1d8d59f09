"""Saliency metrics: PR/ROC curves over 256 thresholds, AP, AUC, adaptive F-measure, Jaccard."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimMismatch, EmptyGroundTruth

BETA2 = 0.3
THRESHOLDS = np.arange(256)


def quantize(pred: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(np.asarray(pred, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.int64)


def _rates(tp, fp, pos, neg):
    pred_pos = tp + fp
    precision = np.where(pred_pos > 0, tp / np.maximum(pred_pos, 1), 1.0)
    recall = np.where(pred_pos > 0, tp / pos, 0.0) if pos > 0 else np.ones_like(tp, dtype=np.float64)
    fpr = fp / neg if neg > 0 else np.zeros_like(fp, dtype=np.float64)
    return precision, recall, fpr


def image_curves(pred: np.ndarray, gt: np.ndarray):
    """Precision, recall and FPR of ``quantize(pred) >= t`` for t = 0..255."""
    pred = np.asarray(pred)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise DimMismatch(f"prediction {pred.shape} vs ground truth {gt.shape}")
    q = quantize(pred)
    pos_hist = np.bincount(q[gt], minlength=256)
    neg_hist = np.bincount(q[~gt], minlength=256)
    # counts of pixels with level >= t
    tp = np.cumsum(pos_hist[::-1])[::-1].astype(np.float64)
    fp = np.cumsum(neg_hist[::-1])[::-1].astype(np.float64)
    return _rates(tp, fp, int(gt.sum()), int((~gt).sum()))


def f_beta(precision, recall, beta2: float = BETA2):
    precision = np.asarray(precision, dtype=np.float64)
    recall = np.asarray(recall, dtype=np.float64)
    den = beta2 * precision + recall
    return np.where(den > 0, (1 + beta2) * precision * recall / np.where(den > 0, den, 1.0), 0.0)


def adaptive_threshold(pred: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    return float(min(pred.mean() + pred.std(), pred.max()))


def adaptive_precision_recall(pred: np.ndarray, gt: np.ndarray):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise DimMismatch(f"prediction {pred.shape} vs ground truth {gt.shape}")
    binary = pred >= adaptive_threshold(pred)
    tp = float((binary & gt).sum())
    fp = float((binary & ~gt).sum())
    p, r, _ = _rates(np.array([tp]), np.array([fp]), int(gt.sum()), int((~gt).sum()))
    return float(p[0]), float(r[0])


def f_measure(pred: np.ndarray, gt: np.ndarray, beta2: float = BETA2) -> float:
    """Adaptive-threshold F-measure of a single map."""
    if not np.asarray(gt, dtype=bool).any():
        raise EmptyGroundTruth("F-measure needs a nonempty ground-truth mask")
    p, r = adaptive_precision_recall(pred, gt)
    return float(f_beta(p, r, beta2))


def jaccard_precision(mask: np.ndarray, gt: np.ndarray) -> tuple[float, float]:
    mask = np.asarray(mask, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if mask.shape != gt.shape:
        raise DimMismatch(f"mask {mask.shape} vs ground truth {gt.shape}")
    union = (mask | gt).sum()
    j = 1.0 if union == 0 else float((mask & gt).sum() / union)
    return j, float((mask == gt).mean())


def _trapezoid(x, y):
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))


def average_precision(precision, recall) -> float:
    order = np.lexsort((-np.asarray(precision), np.asarray(recall)))
    r = np.concatenate([[0.0], np.asarray(recall)[order], [1.0]])
    p = np.asarray(precision)[order]
    p = np.concatenate([[p[0]], p, [p[-1]]])
    return _trapezoid(r, p)


def area_under_roc(fpr, tpr) -> float:
    order = np.lexsort((np.asarray(tpr), np.asarray(fpr)))
    x = np.concatenate([[0.0], np.asarray(fpr)[order], [1.0]])
    y = np.concatenate([[0.0], np.asarray(tpr)[order], [1.0]])
    return _trapezoid(x, y)


@dataclass
class MetricReport:
    ap: float
    auc: float
    fmeasure: float
    fmeasure_std: float
    precision: float
    recall: float
    pr_curve: list = field(default_factory=list)  # (threshold, precision, recall, fpr)
    jaccard: float | None = None
    pixel_precision: float | None = None
    n_images: int = 0

    def summary(self) -> dict:
        out = {k: getattr(self, k) for k in ("ap", "auc", "fmeasure", "fmeasure_std", "precision",
                                             "recall", "n_images")}
        if self.jaccard is not None:
            out["jaccard"] = self.jaccard
            out["pixel_precision"] = self.pixel_precision
        return out

    def to_json(self, path) -> None:
        data = self.summary()
        data["curve"] = [dict(zip(("threshold", "precision", "recall", "fpr"), row)) for row in self.pr_curve]
        Path(path).write_text(json.dumps(data, indent=2, sort_keys=True))

    def curves_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["threshold", "precision", "recall", "fpr"])
            for t, p, r, f in self.pr_curve:
                wr.writerow([t, repr(p), repr(r), repr(f)])


def pr_roc(preds: list, gts: list):
    """Per-threshold precision/recall/FPR averaged over images (summed in index order)."""
    if len(preds) != len(gts) or not preds:
        raise DimMismatch("need matching, nonempty prediction and ground-truth lists")
    if not any(np.asarray(g, dtype=bool).any() for g in gts):
        raise EmptyGroundTruth("no positive pixel in the dataset")
    acc = np.zeros((3, 256))
    for p, g in zip(preds, gts):
        acc += np.stack(image_curves(p, g))
    return acc / len(preds)


def evaluate(preds: list, gts: list, masks: list | None = None, beta2: float = BETA2) -> MetricReport:
    precision, recall, fpr = pr_roc(preds, gts)
    pr = np.zeros(2)
    for p, g in zip(preds, gts):
        pr += adaptive_precision_recall(p, g)
    p_mean, r_mean = pr / len(preds)
    f_curve = f_beta(precision, recall, beta2)
    report = MetricReport(
        ap=average_precision(precision, recall),
        auc=area_under_roc(fpr, recall),
        fmeasure=float(f_beta(p_mean, r_mean, beta2)),
        fmeasure_std=float(f_curve.std()),
        precision=float(p_mean),
        recall=float(r_mean),
        pr_curve=[(int(t), float(a), float(b), float(c)) for t, a, b, c in zip(THRESHOLDS, precision, recall, fpr)],
        n_images=len(preds),
    )
    if masks is not None:
        jp = np.array([jaccard_precision(m, g) for m, g in zip(masks, gts)])
        report.jaccard, report.pixel_precision = (float(v) for v in jp.mean(0))
    return report
