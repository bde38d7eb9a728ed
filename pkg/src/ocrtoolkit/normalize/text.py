"""Text-level clean-up: whitespace/fence sanitization, watermarks, special pages."""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..exceptions import ConfigError
from ..markup import Image, PageOutput, Text
from .._validation import check_fraction

FULL_PAGE_PLACEHOLDER = "![image](image_1.png)"
PAGE_AREA = 1000 * 1000

CASE_NONE = "none"
CASE_FULL_PAGE_IMAGE = "full_page_image"
CASE_BLANK_PAGE = "blank_page"

_OUTER_FENCE = re.compile(r"\A\s*```[ \t]*[\w.+#-]*[ \t]*\n(.*?)\n?[ \t]*```\s*\Z", re.S)
_FENCE_LINE = re.compile(r"^[ \t]*```", re.M)
_TRAILING_WS = re.compile(r"[^\S\n]+$", re.M)
_BLANK_RUN = re.compile(r"\n{3,}")


@dataclass
class NormalizationReport:
    transforms_applied: list = field(default_factory=list)
    removed_watermarks: int = 0
    canonical_case: str = CASE_NONE
    warnings: list = field(default_factory=list)

    def note(self, step):
        if step not in self.transforms_applied:
            self.transforms_applied.append(step)


def _strip_outer_fence(text):
    m = _OUTER_FENCE.match(text)
    if not m or _FENCE_LINE.search(m.group(1)):
        return text
    return m.group(1)


_SANITIZE_STEPS = (
    ("normalize_newlines", lambda t: t.replace("\r\n", "\n").replace("\r", "\n")),
    ("strip_code_fence", _strip_outer_fence),
    ("strip_trailing_whitespace", lambda t: _TRAILING_WS.sub("", t)),
    ("collapse_blank_lines", lambda t: _BLANK_RUN.sub("\n\n", t)),
    ("trim", lambda t: t.strip("\n")),
)


def sanitize(text: str, report: NormalizationReport | None = None):
    """Remove wrapping code fences and harmonize whitespace.

    Rules: CRLF/CR -> LF; a single ``` fence (optional language tag) wrapping the
    whole document is removed; trailing whitespace is stripped on every line;
    three or more consecutive newlines become two; leading/trailing newlines are
    dropped. The rules are applied until nothing changes, so the function is
    idempotent.
    """
    report = report if report is not None else NormalizationReport()
    for _ in range(16):
        before = text
        for name, step in _SANITIZE_STEPS:
            new = step(text)
            if new != text:
                report.note(name)
                text = new
        if text == before:
            break
    return text, report


def compile_watermark_patterns(patterns):
    """Literal strings by default; a ``re:`` prefix marks a regular expression."""
    compiled = []
    for p in patterns:
        if isinstance(p, re.Pattern):
            compiled.append(p)
            continue
        if not isinstance(p, str) or not p:
            raise ConfigError(f"invalid watermark pattern {p!r}: must be a non-empty string")
        if p.startswith("re:"):
            try:
                rx = re.compile(p[3:])
            except re.error as exc:
                raise ConfigError(f"invalid watermark regex {p[3:]!r}: {exc}") from exc
        else:
            rx = re.compile(re.escape(p))
        compiled.append(rx)
    return compiled


def remove_watermarks(text: str, patterns):
    """Delete every non-overlapping match of each pattern, in order."""
    count = 0

    def _drop(m):
        nonlocal count
        if m.group(0):
            count += 1
        return ""

    for rx in compile_watermark_patterns(patterns):
        text = rx.sub(_drop, text)
    return text, count


def canonicalize_special_pages(page: PageOutput, page_area_fraction: float = 0.95,
                               report: NormalizationReport | None = None):
    """Map blank pages to ``""`` and full-page single images to the fixed placeholder."""
    page_area_fraction = check_fraction(page_area_fraction, "page_area_fraction", include_low=False)
    report = report if report is not None else NormalizationReport()
    content = [s for s in page.segments if not (isinstance(s, Text) and not s.text.strip())]
    if not content:
        report.canonical_case = CASE_BLANK_PAGE
        report.note("blank_page")
        return "", report
    if len(content) == 1 and isinstance(content[0], Image):
        bbox = content[0].bbox
        if bbox is None:
            report.warnings.append("single image without bbox; page coverage unknown")
        elif bbox.area >= page_area_fraction * PAGE_AREA:
            report.canonical_case = CASE_FULL_PAGE_IMAGE
            report.note("full_page_image")
            return FULL_PAGE_PLACEHOLDER, report
    report.canonical_case = CASE_NONE
    return page.raw, report
