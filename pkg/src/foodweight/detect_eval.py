"""Detection evaluation: matching, AP/mAP, classification accuracy, average IoU.

Matching is greedy per image and per class: detections claim ground truths
in descending score order, each ground truth at most once.  AP integrates
the all-point (envelope-interpolated) precision-recall curve; the
unqualified mAP averages the ten IoU thresholds 0.50:0.05:0.95, while
mAP@0.5 / mAP@0.75 fix a single threshold.  Score ties break by input
order, so metrics are deterministic and, for distinct scores, independent
of input permutation.
"""

from dataclasses import dataclass, field
from typing import Sequence

from .errors import NoGroundTruth, NoPredictions
from .geometry import BoundingBox, iou

COCO_IOU_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class Detection:
    image_id: str
    box: BoundingBox
    label: str
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"detection score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class GroundTruth:
    image_id: str
    box: BoundingBox
    label: str


@dataclass
class MatchResult:
    """Outcome of matching one image's detections to its ground truths.

    matches holds (detection_index, ground_truth_index) pairs in the greedy
    claim order; unmatched detections are false positives, unclaimed ground
    truths false negatives.
    """

    matches: list = field(default_factory=list)
    false_positives: list = field(default_factory=list)
    false_negatives: list = field(default_factory=list)


def match_detections(
    dets: Sequence[Detection], gts: Sequence[GroundTruth], iou_threshold: float
) -> MatchResult:
    """Greedy same-class matching within one image.

    Detections are visited in descending score order (ties by input order);
    each claims the unmatched same-class ground truth of highest IoU at or
    above the threshold (IoU ties go to the earliest ground truth).
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    result = MatchResult()
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    claimed = set()
    for di in order:
        det = dets[di]
        best_gi = -1
        best_iou = 0.0
        for gi, gt in enumerate(gts):
            if gi in claimed or gt.label != det.label:
                continue
            overlap = iou(det.box, gt.box)
            if overlap >= iou_threshold and overlap > best_iou:
                best_iou = overlap
                best_gi = gi
        if best_gi >= 0:
            claimed.add(best_gi)
            result.matches.append((di, best_gi))
        else:
            result.false_positives.append(di)
    result.false_negatives = [gi for gi in range(len(gts)) if gi not in claimed]
    return result


def _group_indices_by_image(items) -> dict:
    groups = {}
    for i, item in enumerate(items):
        groups.setdefault(item.image_id, []).append(i)
    return groups


INTERPOLATION_MODES = ("all_point", "eleven_point")


def average_precision(
    label: str,
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    iou_threshold: float,
    interpolation: str = "all_point",
):
    """Interpolated AP for one class at one IoU threshold.

    all_point (the default) integrates the precision envelope over every
    recall step; eleven_point averages the interpolated precision at the
    recall levels 0.0, 0.1, ..., 1.0.  Returns None when the class has no
    ground truths (such classes are excluded from mAP rather than scored
    0).  With all-point interpolation each true positive advances recall by
    exactly 1/npos, so a perfect detector scores exactly 1.0.
    """
    if interpolation not in INTERPOLATION_MODES:
        raise ValueError(f"interpolation must be one of {INTERPOLATION_MODES}")
    npos = sum(1 for g in gts if g.label == label)
    if npos == 0:
        return None
    cls_det_idx = [i for i, d in enumerate(dets) if d.label == label]
    if not cls_det_idx:
        return 0.0
    cls_gt_idx = [i for i, g in enumerate(gts) if g.label == label]

    det_groups = {}
    for i in cls_det_idx:
        det_groups.setdefault(dets[i].image_id, []).append(i)
    gt_groups = {}
    for i in cls_gt_idx:
        gt_groups.setdefault(gts[i].image_id, []).append(i)

    true_positive = set()
    for image_id, idxs in det_groups.items():
        local_gts = [gts[i] for i in gt_groups.get(image_id, [])]
        local_dets = [dets[i] for i in idxs]
        result = match_detections(local_dets, local_gts, iou_threshold)
        for det_local, _ in result.matches:
            true_positive.add(idxs[det_local])

    ranked = sorted(cls_det_idx, key=lambda i: (-dets[i].score, i))
    flags = [i in true_positive for i in ranked]
    precisions = []
    recalls = []
    tp_count = 0
    for k, flag in enumerate(flags, start=1):
        if flag:
            tp_count += 1
        precisions.append(tp_count / k)
        recalls.append(tp_count / npos)
    # precision envelope: best precision at this recall or beyond
    for k in range(len(precisions) - 2, -1, -1):
        if precisions[k + 1] > precisions[k]:
            precisions[k] = precisions[k + 1]
    if interpolation == "eleven_point":
        total = 0.0
        for level in range(11):
            r = level / 10.0
            best = 0.0
            for k in range(len(ranked)):
                if recalls[k] >= r:
                    best = precisions[k]
                    break
            total += best
        return total / 11.0
    total = 0.0
    for flag, p in zip(flags, precisions):
        if flag:
            total += p
    return total / npos


def per_class_average_precision(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    thresholds: Sequence[float] = COCO_IOU_THRESHOLDS,
    interpolation: str = "all_point",
) -> dict:
    """AP per class, averaged over the given IoU thresholds.

    Only classes with at least one ground truth appear in the result.
    """
    if not thresholds:
        raise ValueError("at least one IoU threshold is required")
    labels = sorted({g.label for g in gts})
    if not labels:
        raise NoGroundTruth("no ground-truth boxes for any class")
    out = {}
    for label in labels:
        aps = [
            average_precision(label, dets, gts, t, interpolation) for t in thresholds
        ]
        out[label] = sum(aps) / len(aps)
    return out


def mean_average_precision(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    thresholds: Sequence[float] = COCO_IOU_THRESHOLDS,
    interpolation: str = "all_point",
) -> float:
    """Mean over classes of threshold-averaged AP."""
    per_class = per_class_average_precision(dets, gts, thresholds, interpolation)
    return sum(per_class.values()) / len(per_class)


def _top_detection(group: Sequence[Detection]):
    best = group[0]
    for det in group[1:]:
        if det.score > best.score:
            best = det
    return best


def _best_overlap(det: Detection, gts: Sequence[GroundTruth]):
    """Ground truth with the highest IoU against det (any class), with the
    overlap value; (None, 0.0) when the image has no ground truths."""
    best_gt = None
    best_iou = 0.0
    for gt in gts:
        overlap = iou(det.box, gt.box)
        if overlap > best_iou:
            best_iou = overlap
            best_gt = gt
    return best_gt, best_iou


def classification_accuracy(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    iou_threshold: float = 0.5,
) -> float:
    """Fraction of per-image top-score detections whose label matches the
    ground truth they best overlap (requiring IoU at or above the threshold).

    One prediction is counted per image with detections; images whose top
    detection overlaps nothing are counted incorrect.
    """
    if not dets:
        raise NoPredictions("classification accuracy needs at least one detection")
    det_groups = _group_indices_by_image(dets)
    gt_groups = _group_indices_by_image(gts)
    correct = 0
    for image_id, idxs in det_groups.items():
        top = _top_detection([dets[i] for i in idxs])
        image_gts = [gts[i] for i in gt_groups.get(image_id, [])]
        best_gt, best_iou = _best_overlap(top, image_gts)
        if best_gt is not None and best_iou >= iou_threshold and top.label == best_gt.label:
            correct += 1
    return correct / len(det_groups)


def average_iou(dets: Sequence[Detection], gts: Sequence[GroundTruth]) -> float:
    """Mean, over images with detections, of the IoU between the top-score
    detection and its best-overlapping ground truth (0 when the image has
    no ground truth)."""
    if not dets:
        raise NoPredictions("average IoU needs at least one detection")
    det_groups = _group_indices_by_image(dets)
    gt_groups = _group_indices_by_image(gts)
    total = 0.0
    for image_id, idxs in det_groups.items():
        top = _top_detection([dets[i] for i in idxs])
        image_gts = [gts[i] for i in gt_groups.get(image_id, [])]
        _, best_iou = _best_overlap(top, image_gts)
        total += best_iou
    return total / len(det_groups)


@dataclass
class DetectionReport:
    """Table of the headline detection metrics plus per-class AP."""

    map: float
    map_50: float
    map_75: float
    classification_accuracy: float
    average_iou: float
    per_class_ap: dict
    interpolation: str = "all_point"

    def __post_init__(self):
        for name in ("map", "map_50", "map_75", "classification_accuracy", "average_iou"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"metric {name} outside [0, 1]: {value}")
        for label, value in self.per_class_ap.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"per-class AP for {label!r} outside [0, 1]: {value}")
        if self.interpolation not in INTERPOLATION_MODES:
            raise ValueError(f"interpolation must be one of {INTERPOLATION_MODES}")

    def to_json_dict(self) -> dict:
        return {
            "map": self.map,
            "map_50": self.map_50,
            "map_75": self.map_75,
            "classification_accuracy": self.classification_accuracy,
            "average_iou": self.average_iou,
            "per_class_ap": dict(sorted(self.per_class_ap.items())),
            "interpolation": self.interpolation,
        }


def evaluate_detections(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    thresholds: Sequence[float] = COCO_IOU_THRESHOLDS,
    interpolation: str = "all_point",
) -> DetectionReport:
    """Full detection report over one detections/ground-truth pair."""
    per_class = per_class_average_precision(dets, gts, thresholds, interpolation)
    return DetectionReport(
        map=sum(per_class.values()) / len(per_class),
        map_50=mean_average_precision(dets, gts, [0.5], interpolation),
        map_75=mean_average_precision(dets, gts, [0.75], interpolation),
        classification_accuracy=classification_accuracy(dets, gts),
        average_iou=average_iou(dets, gts),
        per_class_ap=per_class,
        interpolation=interpolation,
    )


def format_detection_table(report: DetectionReport) -> str:
    """Fixed-width summary table plus the per-class AP breakdown."""
    lines = [
        f"{'mAP':>10} {'mAP@0.5':>10} {'mAP@0.75':>10} "
        f"{'Cls. Accuracy':>14} {'Avg IoU':>10}",
        f"{report.map:>10.4f} {report.map_50:>10.4f} {report.map_75:>10.4f} "
        f"{report.classification_accuracy:>14.4f} {report.average_iou:>10.4f}",
        "",
        f"{'Class':<24} {'AP':>10}",
    ]
    for label, ap in sorted(report.per_class_ap.items()):
        lines.append(f"{label:<24} {ap:>10.4f}")
    return "\n".join(lines)
