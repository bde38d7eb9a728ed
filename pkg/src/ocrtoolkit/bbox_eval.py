"""Localization benchmark scoring: F1 at an IoU threshold, mean IoU, count accuracy."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._validation import check_fraction
from .exceptions import DataError, PairingError
from .markup import BBox

DEFAULT_IOU_THRESHOLD = 0.5
MATCHING_METHODS = ("optimal", "greedy")
MEAN_IOU_MODES = ("gt", "matched")


def iou(a: BBox | None, b: BBox | None) -> float:
    """Intersection over union. Zero-area unions and missing boxes give 0."""
    if a is None or b is None:
        return 0.0
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    inter = iw * ih if iw > 0 and ih > 0 else 0
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def iou_matrix(gt, pred):
    return np.array([[iou(g, p) for p in pred] for g in gt], dtype=float).reshape(len(gt), len(pred))


def _greedy(ious, threshold):
    cands = [
        (-ious[g, p], g, p)
        for g, p in product(range(ious.shape[0]), range(ious.shape[1]))
        if ious[g, p] >= threshold
    ]
    cands.sort()
    used_g, used_p, out = set(), set(), []
    for neg, g, p in cands:
        if g in used_g or p in used_p:
            continue
        used_g.add(g)
        used_p.add(p)
        out.append((g, p, float(-neg)))
    return out


def _optimal(ious, threshold):
    # lexicographic objective: number of matches first, then total IoU
    ok = ious >= threshold
    if not ok.any():
        return []
    n_g, n_p = ious.shape
    weight = np.where(ok, (min(n_g, n_p) + 1.0) + ious, 0.0)
    rows, cols = linear_sum_assignment(weight, maximize=True)
    out = [(int(g), int(p), float(ious[g, p])) for g, p in zip(rows, cols) if ok[g, p]]
    out.sort(key=lambda t: (-t[2], t[0], t[1]))
    return out


def match_boxes(gt, pred, iou_threshold=DEFAULT_IOU_THRESHOLD, method="optimal"):
    """One-to-one matching of predicted to ground-truth boxes.

    ``method="optimal"`` maximizes the number of pairs with IoU >= threshold and,
    among those, the summed IoU. ``method="greedy"`` accepts candidate pairs in
    order of decreasing IoU (ties: lower gt index, then lower pred index).

    Returns ``[(gt_idx, pred_idx, iou), ...]`` sorted by decreasing IoU.
    """
    iou_threshold = check_fraction(iou_threshold, "iou_threshold", include_low=False)
    if method not in MATCHING_METHODS:
        raise ValueError(f"method must be one of {MATCHING_METHODS}, got {method!r}")
    if not gt or not pred:
        return []
    ious = iou_matrix(gt, pred)
    return _greedy(ious, iou_threshold) if method == "greedy" else _optimal(ious, iou_threshold)


@dataclass(frozen=True)
class PageBoxes:
    doc_id: str
    subset: str
    boxes: tuple

    @classmethod
    def from_dict(cls, d, line=None):
        try:
            doc_id, subset, boxes = d["doc_id"], d.get("subset", ""), d["boxes"]
        except KeyError as exc:
            raise DataError(f"missing field {exc.args[0]!r}", line=line, field=exc.args[0]) from None
        if not isinstance(doc_id, str):
            raise DataError("doc_id must be a string", line=line, field="doc_id")
        if not isinstance(boxes, list):
            raise DataError("boxes must be a list", line=line, field="boxes")
        try:
            parsed = tuple(BBox.from_sequence(b) for b in boxes)
        except (TypeError, ValueError) as exc:
            raise DataError(f"bad box in {doc_id!r}: {exc}", line=line, field="boxes") from None
        return cls(doc_id, str(subset), parsed)


@dataclass
class PageEval:
    tp: int
    fp: int
    fn: int
    matched_ious: list
    count_exact: bool
    n_gt: int = 0


def evaluate_page(gt: PageBoxes, pred: PageBoxes | None, threshold=DEFAULT_IOU_THRESHOLD,
                  method="optimal") -> PageEval:
    if pred is not None and pred.doc_id != gt.doc_id:
        raise PairingError(f"doc_id mismatch: {gt.doc_id!r} vs {pred.doc_id!r}", [pred.doc_id])
    pboxes = list(pred.boxes) if pred is not None else []
    gboxes = list(gt.boxes)
    matches = match_boxes(gboxes, pboxes, threshold, method)
    tp = len(matches)
    return PageEval(
        tp=tp,
        fp=len(pboxes) - tp,
        fn=len(gboxes) - tp,
        matched_ious=sorted((m[2] for m in matches), reverse=True),
        count_exact=len(pboxes) == len(gboxes),
        n_gt=len(gboxes),
    )


@dataclass
class SubsetReport:
    f1_at_05: float
    mean_iou: float
    count_accuracy: float
    pages: int
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def to_dict(self):
        return {"f1_at_05": self.f1_at_05, "mean_iou": self.mean_iou,
                "count_accuracy": self.count_accuracy, "pages": self.pages}


@dataclass
class _Acc:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    n_gt: int = 0
    exact: int = 0
    pages: int = 0
    ious: list = field(default_factory=list)

    def add(self, ev: PageEval):
        self.tp += ev.tp
        self.fp += ev.fp
        self.fn += ev.fn
        self.ious.extend(ev.matched_ious)
        self.n_gt += ev.n_gt
        self.exact += ev.count_exact
        self.pages += 1

    def report(self, mean_iou_mode):
        denom = 2 * self.tp + self.fp + self.fn
        f1 = 1.0 if denom == 0 else 2 * self.tp / denom
        total = math.fsum(self.ious)
        if mean_iou_mode == "gt":
            if self.n_gt:
                mean = total / self.n_gt
            else:
                mean = 1.0 if self.fp == 0 else 0.0
        else:
            mean = total / len(self.ious) if self.ious else (1.0 if self.fp == 0 and self.fn == 0 else 0.0)
        acc = 100.0 * self.exact / self.pages if self.pages else 0.0
        return SubsetReport(f1, mean, acc, self.pages, self.tp, self.fp, self.fn)


def evaluate_corpus(pairs, threshold=DEFAULT_IOU_THRESHOLD, method="optimal", mean_iou_mode="gt"):
    """Micro-averaged metrics per subset from ``(gt, pred)`` page pairs.

    ``pred`` may be ``None`` (no prediction for the page: every gt box is a
    miss). Mean IoU averages over gt boxes with unmatched ones counting 0
    (``mean_iou_mode="gt"``) or over matched pairs only (``"matched"``).
    """
    if mean_iou_mode not in MEAN_IOU_MODES:
        raise ValueError(f"mean_iou_mode must be one of {MEAN_IOU_MODES}")
    accs = defaultdict(_Acc)
    for gt, pred in pairs:
        accs[gt.subset].add(evaluate_page(gt, pred, threshold, method))
    return {subset: accs[subset].report(mean_iou_mode) for subset in sorted(accs)}


def pair_pages(gt_pages, pred_pages):
    """Pair predictions with ground truth by doc_id.

    Ground-truth pages without a prediction are paired with ``None``; a
    prediction without ground truth raises :class:`PairingError`.
    """
    gt_by_id = {}
    for g in gt_pages:
        if g.doc_id in gt_by_id:
            raise DataError(f"duplicate ground-truth doc_id {g.doc_id!r}", field="doc_id")
        gt_by_id[g.doc_id] = g
    pred_by_id = {}
    for p in pred_pages:
        if p.doc_id in pred_by_id:
            raise DataError(f"duplicate prediction doc_id {p.doc_id!r}", field="doc_id")
        pred_by_id[p.doc_id] = p
    orphans = sorted(set(pred_by_id) - set(gt_by_id))
    if orphans:
        shown = ", ".join(orphans[:20]) + (" ..." if len(orphans) > 20 else "")
        raise PairingError(f"{len(orphans)} prediction(s) without ground truth: {shown}", orphans)
    return [(g, pred_by_id.get(doc_id)) for doc_id, g in gt_by_id.items()]
