"""Formatting-artifact detection on parsed pages."""
from __future__ import annotations

import re
from dataclasses import dataclass

from .markup import MATH_TYPES, Heading, PageOutput, Text
from .mathcheck import _HTML_TAG, is_structural, validate_math

HTML_IN_MATH = "html_in_math"
MARKDOWN_ITALIC_VARIABLE = "markdown_italic_variable"
UNBALANCED_DELIMITER = "unbalanced_delimiter"
LATEX_OUTSIDE_MATH = "latex_outside_math"
CATEGORIES = (HTML_IN_MATH, MARKDOWN_ITALIC_VARIABLE, UNBALANCED_DELIMITER, LATEX_OUTSIDE_MATH)

# a single Latin letter, optionally followed by digits: *x*, _k2_
_ITALIC_VAR = re.compile(r"(?<![\w*])\*([A-Za-z][0-9]*)\*(?![\w*])|(?<![\w])_([A-Za-z][0-9]*)_(?![\w])")
_LATEX_CMD = re.compile(r"\\[A-Za-z]+")


@dataclass(frozen=True, order=True)
class Artifact:
    offset: int  # UTF-8 byte offset into the raw page
    category: str
    detail: str = ""

    def to_dict(self):
        return {"offset": self.offset, "category": self.category, "detail": self.detail}


def _delimiter_width(raw, start):
    return 2 if raw.startswith(("$$", "\\(", "\\["), start) else 1


def detect_format_artifacts(page: PageOutput, allowlist=None):
    """List formatting artifacts, sorted by offset."""
    raw = page.raw
    found = []  # (char offset, category, detail)
    for seg, (start, _end) in zip(page.segments, page.spans):
        if isinstance(seg, MATH_TYPES):
            body = start + _delimiter_width(raw, start)
            for m in _HTML_TAG.finditer(seg.content):
                found.append((body + m.start(), HTML_IN_MATH, m.group(0)))
            issues = validate_math(seg.content, allowlist).issues
            structural = [i for i in issues if is_structural(i)]
            if structural:
                found.append((start, UNBALANCED_DELIMITER, "; ".join(dict.fromkeys(structural))))
        elif isinstance(seg, Text):
            for m in _ITALIC_VAR.finditer(seg.text):
                found.append((start + m.start(), MARKDOWN_ITALIC_VARIABLE, m.group(0)))
            for m in _LATEX_CMD.finditer(seg.text):
                if _escaped(seg.text, m.start()):
                    continue
                found.append((start + m.start(), LATEX_OUTSIDE_MATH, m.group(0)))
        elif isinstance(seg, Heading):
            body = start + seg.level + 1
            for m in _LATEX_CMD.finditer(seg.text):
                if not _escaped(seg.text, m.start()):
                    found.append((body + m.start(), LATEX_OUTSIDE_MATH, m.group(0)))
    byte_at = _byte_offsets(raw, {f[0] for f in found})
    out = [Artifact(byte_at[pos], cat, detail) for pos, cat, detail in found]
    out.extend(
        Artifact(w.offset, UNBALANCED_DELIMITER, w.message)
        for w in page.warnings
        if w.category == UNBALANCED_DELIMITER
    )
    return sorted(out)


def _escaped(text, pos):
    # ``\\section`` is a line break followed by letters, not a command
    n = 0
    while pos - n - 1 >= 0 and text[pos - n - 1] == "\\":
        n += 1
    return n % 2 == 1


def _byte_offsets(raw, positions):
    out, b, prev = {}, 0, 0
    for p in sorted(positions):
        b += len(raw[prev:p].encode("utf-8", "surrogatepass"))
        out[p] = b
        prev = p
    return out
