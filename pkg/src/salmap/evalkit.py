"""Segmentation and saliency evaluation: DSC, JSI, Acc, Sens, Spec, ROC/AUC."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class MetricsReport:
    dsc: float
    jsi: float
    acc: float
    sens: float
    spec: float
    tp: int
    fp: int
    tn: int
    fn: int


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float


def _ratio(num, den, both_absent):
    if den == 0:
        return 1.0 if both_absent else 0.0
    return num / den


def mask_metrics(pred, gt):
    """Pixel-wise overlap metrics between a predicted and reference mask."""
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ValueError("mask sizes differ")
    tp = int(np.count_nonzero(pred & gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    tn = int(np.count_nonzero(~pred & ~gt))
    total = tp + fp + tn + fn
    pos_absent = not pred.any() and not gt.any()
    neg_absent = pred.all() and gt.all()
    return MetricsReport(
        dsc=_ratio(2 * tp, 2 * tp + fp + fn, pos_absent),
        jsi=_ratio(tp, tp + fp + fn, pos_absent),
        acc=(tp + tn) / total,
        sens=_ratio(tp, tp + fn, not gt.any() and not pred.any()),
        spec=_ratio(tn, tn + fp, gt.all() and pred.all()),
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
    )


def roc_auc(saliency, gt):
    """ROC curve over all unique saliency thresholds, trapezoidal AUC."""
    saliency = np.asarray(saliency, dtype=np.float64).ravel()
    gt = np.asarray(gt, dtype=bool).ravel()
    if gt.all() or not gt.any():
        raise ValueError("ground truth must contain both classes")
    order = np.argsort(-saliency, kind="stable")
    y = gt[order].astype(np.float64)
    s = saliency[order]
    tp = np.cumsum(y)
    fp = np.cumsum(1.0 - y)
    # collapse ties: keep the last point of each equal-score run
    last = np.r_[s[1:] != s[:-1], True]
    tpr = np.r_[0.0, tp[last] / gt.sum()]
    fpr = np.r_[0.0, fp[last] / (~gt).sum()]
    auc = float(np.trapezoid(tpr, fpr))
    return RocCurve(fpr=fpr, tpr=tpr, auc=auc)


def batch_evaluate(pairs):
    """Macro-averaged metrics plus the per-image reports."""
    if not pairs:
        raise ValueError("empty evaluation batch")
    reports = [mask_metrics(p, g) for p, g in pairs]
    mean = MetricsReport(
        dsc=float(np.mean([r.dsc for r in reports])),
        jsi=float(np.mean([r.jsi for r in reports])),
        acc=float(np.mean([r.acc for r in reports])),
        sens=float(np.mean([r.sens for r in reports])),
        spec=float(np.mean([r.spec for r in reports])),
        tp=sum(r.tp for r in reports),
        fp=sum(r.fp for r in reports),
        tn=sum(r.tn for r in reports),
        fn=sum(r.fn for r in reports),
    )
    return mean, reports
