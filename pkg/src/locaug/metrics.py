"""Evaluation measures: precision/recall/F-measure and intersection-over-union.

F_beta = (1+beta^2) * P * R / (beta^2 * P + R), with beta^2 defaulting to 0.3
to weight precision more heavily.  Mean IoU comes from a single dataset-wide
confusion matrix; classes absent from both prediction and ground truth are
excluded from the mean.

Saliency maps must be thresholded before F can be computed.  The default is
the adaptive per-image threshold min(1, 2*mean(map)); a fixed threshold can
be supplied instead.  Reports record which one was used.
"""

from dataclasses import dataclass

import numpy as np

DEFAULT_BETA2 = 0.3
IGNORE_CLASS = 255


@dataclass
class MetricReport:
    precision: float
    recall: float
    f_beta: float
    per_class_iou: list | None = None
    mean_iou: float | None = None
    threshold: object = None
    beta2: float = DEFAULT_BETA2
    images: int = 0


def precision_recall(pred_mask, gt_mask):
    """Precision and recall of two binary masks.

    Conventions: no positive predictions => precision 0; empty ground truth =>
    recall 0; but an empty prediction matching an empty ground truth counts
    as a perfect (1, 1).
    """
    pred = np.asarray(pred_mask) != 0
    gt = np.asarray(gt_mask) != 0
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    tp = int(np.count_nonzero(pred & gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    if tp + fp == 0 and tp + fn == 0:
        return 1.0, 1.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return precision, recall


def f_measure(precision, recall, beta2=DEFAULT_BETA2):
    if beta2 <= 0:
        raise ValueError("beta2 must be positive")
    denom = beta2 * precision + recall
    if denom == 0:
        return 0.0
    return (1.0 + beta2) * precision * recall / denom


def adaptive_threshold(saliency_map):
    """Per-image adaptive threshold: twice the map mean, clamped to [0,1]."""
    return min(1.0, 2.0 * float(np.mean(saliency_map)))


def binarize(saliency_map, threshold):
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0,1], got {threshold}")
    return (np.asarray(saliency_map) >= threshold).astype(np.float64)


def confusion_accumulate(pred_classes, gt_classes, num_classes, ignore=IGNORE_CLASS, out=None):
    """Add one image's K x K counts (rows = ground truth, cols = prediction)."""
    pred = np.asarray(pred_classes).astype(np.int64).ravel()
    gt = np.asarray(gt_classes).astype(np.int64).ravel()
    if pred.shape != gt.shape:
        raise ValueError("prediction and ground truth sizes differ")
    keep = gt != ignore
    pred, gt = pred[keep], gt[keep]
    if np.any(gt < 0) or np.any(gt >= num_classes) or np.any(pred < 0) or np.any(pred >= num_classes):
        raise ValueError(f"class values outside 0..{num_classes - 1}")
    counts = np.bincount(gt * num_classes + pred, minlength=num_classes**2)
    counts = counts.reshape(num_classes, num_classes)
    if out is None:
        return counts
    out += counts
    return out


def per_class_iou(counts):
    """IoU per class; NaN marks classes absent from both GT and prediction."""
    counts = np.asarray(counts, dtype=np.float64)
    tp = np.diag(counts)
    union = counts.sum(axis=1) + counts.sum(axis=0) - tp
    with np.errstate(invalid="ignore"):
        return np.where(union > 0, tp / np.where(union > 0, union, 1.0), np.nan)


def mean_iou(counts):
    ious = per_class_iou(counts)
    present = ~np.isnan(ious)
    if not present.any():
        return float("nan")
    return float(ious[present].mean())


def evaluate_saliency(pred_maps, gt_masks, threshold="adaptive", beta2=DEFAULT_BETA2):
    """Per-image F averaged over the dataset, plus dataset-wide binary IoU."""
    maps = list(pred_maps)
    gts = list(gt_masks)
    if not maps or len(maps) != len(gts):
        raise ValueError("need equal, nonzero numbers of predictions and masks")
    ps, rs, fs = [], [], []
    counts = np.zeros((2, 2), dtype=np.int64)
    for sal, gt in zip(maps, gts):
        th = adaptive_threshold(sal) if threshold == "adaptive" else float(threshold)
        mask = binarize(sal, th)
        p, r = precision_recall(mask, gt)
        ps.append(p)
        rs.append(r)
        fs.append(f_measure(p, r, beta2))
        confusion_accumulate(mask.astype(np.int64), np.asarray(gt).astype(np.int64), 2, out=counts)
    ious = per_class_iou(counts)
    return MetricReport(
        precision=float(np.mean(ps)),
        recall=float(np.mean(rs)),
        f_beta=float(np.mean(fs)),
        per_class_iou=[float(v) for v in ious],
        mean_iou=mean_iou(counts),
        threshold=threshold,
        beta2=beta2,
        images=len(maps),
    )


def evaluate_multiclass(pred_classes, gt_classes, num_classes, ignore=IGNORE_CLASS):
    """Single dataset-wide confusion matrix, as in FCN-style evaluation."""
    preds = list(pred_classes)
    gts = list(gt_classes)
    if not preds or len(preds) != len(gts):
        raise ValueError("need equal, nonzero numbers of predictions and masks")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    for pred, gt in zip(preds, gts):
        confusion_accumulate(pred, gt, num_classes, ignore, out=counts)
    ious = per_class_iou(counts)
    # dataset-wide pixel precision/recall are not meaningful per class here;
    # report the foreground-free fields as NaN-safe zeros
    return MetricReport(
        precision=float("nan"),
        recall=float("nan"),
        f_beta=float("nan"),
        per_class_iou=[float(v) for v in ious],
        mean_iou=mean_iou(counts),
        threshold=None,
        images=len(preds),
    )


def evaluate_dataset(predict, samples, task="saliency", threshold="adaptive",
                     beta2=DEFAULT_BETA2, num_classes=None):
    """Evaluate ``predict`` (callable image -> map/classmap, or a list of
    precomputed predictions) against a dataset of Samples."""
    samples = list(samples)
    if not samples:
        raise ValueError("dataset is empty")
    if callable(predict):
        preds = [predict(s.image) for s in samples]
    else:
        preds = list(predict)
    gts = [s.mask for s in samples]
    if task == "saliency":
        return evaluate_saliency(preds, gts, threshold, beta2)
    if task == "multiclass":
        if num_classes is None:
            raise ValueError("num_classes required for multiclass evaluation")
        return evaluate_multiclass(preds, gts, num_classes)
    raise ValueError(f"unknown task {task!r}")


def report_lines(report):
    """Machine-readable key=value lines."""
    lines = []
    for key in ("precision", "recall", "f_beta"):
        val = getattr(report, key)
        if not np.isnan(val):
            lines.append(f"{key}={val:.6f}")
    if report.mean_iou is not None:
        lines.append(f"mean_iou={report.mean_iou:.6f}")
    if report.per_class_iou is not None:
        for k, iou in enumerate(report.per_class_iou):
            lines.append(f"iou_class_{k}={iou:.6f}" if not np.isnan(iou) else f"iou_class_{k}=absent")
    if report.threshold is not None:
        lines.append(f"threshold={report.threshold}")
    lines.append(f"beta2={report.beta2}")
    lines.append(f"images={report.images}")
    return lines


def format_report(report):
    """Plain-text table for terminals."""
    rows = [("metric", "value")]
    for line in report_lines(report):
        key, val = line.split("=", 1)
        rows.append((key, val))
    width = max(len(k) for k, _ in rows)
    sep = "-" * (width + 2 + max(len(v) for _, v in rows))
    out = [rows[0][0].ljust(width) + "  " + rows[0][1], sep]
    out += [k.ljust(width) + "  " + v for k, v in rows[1:]]
    return "\n".join(out)
