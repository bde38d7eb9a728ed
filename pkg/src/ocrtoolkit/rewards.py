"""Verifiable reward components for OCR rollouts.

Every component maps a parsed rollout to ``[0, 1]`` or to ``None`` when it has
no signal for the page (no tests, no math spans, no ground-truth boxes). The
aggregate is a weighted mean over the components that are present.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Optional, Union

from ._validation import check_fraction, check_weights
from .artifacts import detect_format_artifacts
from .bbox_eval import iou
from .exceptions import DataError, NoRewardSignal
from .markup import BBox, Image, PageOutput, extract_math_spans, parse_page
from .mathcheck import validate_math
from .normalize.loops import DEFAULT_LOOP_THRESHOLD, MIN_LOOP_BYTES, detect_loops

COMPONENTS = ("unit_tests", "repetition", "math", "formatting", "bbox")
DEFAULT_FORMATTING_PENALTY = 0.25


# -- unit tests --------------------------------------------------------------

@dataclass(frozen=True)
class PresentTest:
    anchor: str
    max_edit_distance: int = 0

    def __post_init__(self):
        _check_anchor(self.anchor)
        if not 0 <= self.max_edit_distance <= len(self.anchor):
            raise ValueError("max_edit_distance must lie in [0, len(anchor)]")


@dataclass(frozen=True)
class AbsentTest:
    anchor: str

    def __post_init__(self):
        _check_anchor(self.anchor)


@dataclass(frozen=True)
class OrderTest:
    first: str
    then: str

    def __post_init__(self):
        _check_anchor(self.first)
        _check_anchor(self.then)


@dataclass(frozen=True)
class MathRendersTest:
    pass


@dataclass(frozen=True)
class HeaderFooterPresentTest:
    """Rewards *presence* of running headers, footers and page numbers."""

    anchor: str
    max_edit_distance: int = 0

    def __post_init__(self):
        PresentTest(self.anchor, self.max_edit_distance)


TestCase = Union[PresentTest, AbsentTest, OrderTest, MathRendersTest, HeaderFooterPresentTest]


def _check_anchor(anchor):
    if not isinstance(anchor, str) or not anchor:
        raise ValueError("test anchors must be non-empty strings")


_TEST_TYPES = {
    "present": (PresentTest, ("anchor",), ("max_edit_distance",)),
    "absent": (AbsentTest, ("anchor",), ()),
    "order": (OrderTest, ("first", "then"), ()),
    "math": (MathRendersTest, (), ()),
    "header_footer_present": (HeaderFooterPresentTest, ("anchor",), ("max_edit_distance",)),
}


def parse_test_case(d) -> TestCase:
    """Build a test case from its JSON form ``{"type": ..., ...fields}``."""
    if not isinstance(d, dict) or "type" not in d:
        raise DataError("test must be an object with a 'type' field", field="type")
    kind = d["type"]
    if kind not in _TEST_TYPES:
        raise DataError(f"unknown test type {kind!r}", field="type")
    cls, required, optional = _TEST_TYPES[kind]
    kwargs = {}
    for name in required:
        if name not in d:
            raise DataError(f"{kind} test missing {name!r}", field=name)
        kwargs[name] = d[name]
    for name in optional:
        if name in d:
            kwargs[name] = d[name]
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise DataError(f"invalid {kind} test: {exc}", field=kind) from None


def min_substring_distance(pattern: str, text: str) -> int:
    """Smallest Levenshtein distance between ``pattern`` and any substring of ``text``.

    Bit-parallel search (Myers 1999 / Hyyrö) over code points; O(len(text)) big-int
    operations.
    """
    m = len(pattern)
    if m == 0:
        return 0
    peq = {}
    for i, c in enumerate(pattern):
        peq[c] = peq.get(c, 0) | (1 << i)
    full = (1 << m) - 1
    high = 1 << (m - 1)
    pv, mv, score = full, 0, m
    best = m
    for c in text:
        eq = peq.get(c, 0)
        xv = eq | mv
        xh = (((eq & pv) + pv) ^ pv) | eq
        ph = (mv | ~(xh | pv)) & full
        mh = pv & xh
        if ph & high:
            score += 1
        elif mh & high:
            score -= 1
        ph = (ph << 1) & full
        mh = (mh << 1) & full
        pv = (mh | ~(xv | ph)) & full
        mv = ph & xv
        if score < best:
            best = score
            if best == 0:
                break
    return best


def _fuzzy_contains(text, anchor, k):
    if anchor in text:
        return True
    return k > 0 and min_substring_distance(anchor, text) <= k


def run_test(page: PageOutput, test, allowlist=None) -> bool:
    text = page.raw
    if isinstance(test, (PresentTest, HeaderFooterPresentTest)):
        return _fuzzy_contains(text, test.anchor, test.max_edit_distance)
    if isinstance(test, AbsentTest):
        return test.anchor not in text
    if isinstance(test, OrderTest):
        a, b = text.find(test.first), text.find(test.then)
        return a >= 0 and b >= 0 and a < b
    if isinstance(test, MathRendersTest):
        return all(validate_math(s, allowlist).valid for s, _ in extract_math_spans(page))
    raise TypeError(f"unknown test case {test!r}")


def score_unit_tests(page: PageOutput, tests, allowlist=None) -> Optional[float]:
    """Fraction of tests passed; ``None`` for an empty test list."""
    tests = list(tests)
    if not tests:
        return None
    return sum(run_test(page, t, allowlist) for t in tests) / len(tests)


# -- page-level rewards ------------------------------------------------------

def repetition_reward(page: PageOutput, threshold=DEFAULT_LOOP_THRESHOLD, partial_ceiling=None,
                      min_length=MIN_LOOP_BYTES) -> float:
    """0 for loop-flagged or unterminated output, 1 otherwise.

    With ``partial_ceiling`` set, eligible outputs instead earn
    ``clip((ratio - threshold) / (partial_ceiling - threshold), 0, 1)``.
    """
    if not page.terminated_with_eos:
        return 0.0
    rep = detect_loops(page.raw, threshold, min_length)
    if partial_ceiling is None or not rep.eligible:
        return 0.0 if rep.flagged else 1.0
    ceiling = check_fraction(partial_ceiling, "partial_ceiling", low=threshold, include_low=False, high=float("inf"))
    return min(1.0, max(0.0, (rep.compression_ratio - threshold) / (ceiling - threshold)))


def math_reward(page: PageOutput, allowlist=None) -> Optional[float]:
    spans = extract_math_spans(page)
    if not spans:
        return None
    return sum(validate_math(s, allowlist).valid for s, _ in spans) / len(spans)


def formatting_reward(page: PageOutput, penalty=DEFAULT_FORMATTING_PENALTY, allowlist=None) -> float:
    penalty = check_fraction(penalty, "penalty", high=float("inf"))
    n = len(detect_format_artifacts(page, allowlist))
    return max(0.0, 1.0 - penalty * n)


# -- bbox reward -------------------------------------------------------------

@dataclass(frozen=True)
class BoxMap:
    """Image id -> box for one page; ``duplicates`` counts repeated ids.

    A repeated id keeps its first box; the extra occurrences still count in
    ``size`` so that reusing an id is penalized like a hallucinated box.
    """

    boxes: dict = field(default_factory=dict)
    duplicates: int = 0

    @property
    def size(self):
        return len(self.boxes) + self.duplicates

    @classmethod
    def from_refs(cls, refs):
        boxes, dup = {}, 0
        for ref in refs:
            if ref.id in boxes:
                dup += 1
            else:
                boxes[ref.id] = ref.bbox
        return cls(boxes, dup)

    @classmethod
    def from_page(cls, page: PageOutput):
        return cls.from_refs(s.ref for s in page.segments if isinstance(s, Image))

    @classmethod
    def from_json(cls, obj):
        """``{"1": [x1, y1, x2, y2], ...}`` or ``[{"id": 1, "box": [...]}, ...]``."""
        if isinstance(obj, dict):
            items = [(int(k), v) for k, v in obj.items()]
        elif isinstance(obj, list):
            items = [(int(e["id"]), e.get("box")) for e in obj]
        else:
            raise DataError("boxes must be an object or a list", field="boxes")
        boxes, dup = {}, 0
        for k, v in items:
            if k < 1:
                raise DataError(f"image id must be positive, got {k}", field="boxes")
            box = None if v is None else BBox.from_sequence(v)
            if k in boxes:
                dup += 1
            else:
                boxes[k] = box
        return cls(boxes, dup)


def _as_boxmap(x):
    if isinstance(x, BoxMap):
        return x
    if isinstance(x, PageOutput):
        return BoxMap.from_page(x)
    return BoxMap({int(k): _coerce_box(v) for k, v in dict(x).items()})


def _coerce_box(v):
    if v is None or isinstance(v, BBox):
        return v
    return BBox.from_sequence(v)


def bbox_reward(gt, pred) -> float:
    """Mean IoU over shared image ids, scaled by ``|shared| / max(|gt|, |pred|)``.

    Two empty maps score 1.0 (nothing to localize, nothing hallucinated).
    """
    gt, pred = _as_boxmap(gt), _as_boxmap(pred)
    denom = max(gt.size, pred.size)
    if denom == 0:
        return 1.0
    shared = sorted(gt.boxes.keys() & pred.boxes.keys())
    if not shared:
        return 0.0
    mean_iou = sum(iou(pred.boxes[i], gt.boxes[i]) for i in shared) / len(shared)
    return mean_iou * (len(shared) / denom)


# -- aggregation -------------------------------------------------------------

@dataclass
class RewardBreakdown:
    unit_test_score: Optional[float] = None
    repetition_score: Optional[float] = None
    math_score: Optional[float] = None
    formatting_score: Optional[float] = None
    bbox_score: Optional[float] = None
    aggregate: Optional[float] = None

    def components(self):
        return {
            "unit_tests": self.unit_test_score,
            "repetition": self.repetition_score,
            "math": self.math_score,
            "formatting": self.formatting_score,
            "bbox": self.bbox_score,
        }

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def aggregate_reward(components: RewardBreakdown, weights=None) -> float:
    """Weighted mean over present components (equal weights by default)."""
    w = {name: 1.0 for name in COMPONENTS}
    if weights:
        w.update(check_weights(weights, COMPONENTS))
    num = den = 0.0
    for name, value in components.components().items():
        if value is None:
            continue
        num += w[name] * value
        den += w[name]
    if den == 0:
        raise NoRewardSignal("no reward signal: every component is absent or has zero weight")
    return num / den


@dataclass
class RewardConfig:
    weights: dict = field(default_factory=dict)
    loop_threshold: float = DEFAULT_LOOP_THRESHOLD
    min_loop_length: int = MIN_LOOP_BYTES
    repetition_partial_ceiling: Optional[float] = None
    formatting_penalty: float = DEFAULT_FORMATTING_PENALTY
    allowlist: object = None


def score_rollout(output, eos=True, tests=(), gt_boxes=None, config=None) -> RewardBreakdown:
    """Compute every component for one rollout plus the weighted aggregate."""
    cfg = config or RewardConfig()
    page = output if isinstance(output, PageOutput) else parse_page(output, eos)
    rb = RewardBreakdown(
        unit_test_score=score_unit_tests(page, tests, cfg.allowlist),
        repetition_score=repetition_reward(page, cfg.loop_threshold, cfg.repetition_partial_ceiling,
                                           cfg.min_loop_length),
        math_score=math_reward(page, cfg.allowlist),
        formatting_score=formatting_reward(page, cfg.formatting_penalty, cfg.allowlist),
        bbox_score=None if gt_boxes is None else bbox_reward(gt_boxes, BoxMap.from_page(page)),
    )
    rb.aggregate = aggregate_reward(rb, cfg.weights)
    return rb
