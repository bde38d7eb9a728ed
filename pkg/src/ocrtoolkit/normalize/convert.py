"""LaTeX-to-canonical conversion pass with structured metadata."""
from __future__ import annotations

import re
import time
from dataclasses import dataclass

from ..artifacts import _LATEX_CMD, _escaped
from ..markup import MATH_TYPES, Heading, HtmlTable, Text, parse_page
from ..mathcheck import validate_math

STATUS_SUCCESS = "success"
STATUS_PARTIAL = "partial"
STATUS_TIMEOUT = "timeout"
DEFAULT_BUDGET_SECONDS = 5.0
_MAX_PASSES = 8

_SECTION = re.compile(r"\\((?:sub){0,2})section\*?\{([^{}\n]*)\}")
_TABLE_SEP_CELL = re.compile(r"\s*:?-+:?\s*")
_CELL_SPLIT = re.compile(r"(?<!\\)\|")
_MISSING_NUMBER = re.compile(
    r"(?i)\b(?:fig(?:ure)?s?|tab(?:le)?s?|eq(?:uation)?s?)\.?\s*~?\s*\?\?"
)


@dataclass(frozen=True)
class ConversionMetadata:
    status: str
    unresolved_references: int
    missing_figure_numbering: bool
    math_compatible: bool

    def to_dict(self):
        return {
            "status": self.status,
            "unresolved_references": self.unresolved_references,
            "missing_figure_numbering": self.missing_figure_numbering,
            "math_compatible": self.math_compatible,
        }


def _split_cells(line):
    s = line.strip()
    if s.startswith("|"):
        s = s[1:]
    if s.endswith("|") and not s.endswith("\\|"):
        s = s[:-1]
    return [c.strip() for c in _CELL_SPLIT.split(s)]


def _is_separator(line):
    if "-" not in line or "|" not in line:
        return False
    cells = _split_cells(line)
    return all(_TABLE_SEP_CELL.fullmatch(c) for c in cells)


def _table_html(header, rows):
    width = len(header)
    out = ["<table><thead><tr>"]
    out.extend(f"<th>{c}</th>" for c in header)
    out.append("</tr></thead>")
    if rows:
        out.append("<tbody>")
        for r in rows:
            r = (r + [""] * width)[:width]
            out.append("<tr>" + "".join(f"<td>{c}</td>" for c in r) + "</tr>")
        out.append("</tbody>")
    out.append("</table>")
    return "".join(out)


def _protected_lines(text, page):
    """Indices of lines touched by an HTML table or a multi-line math span."""
    blocked = set()
    for seg, (a, b) in zip(page.segments, page.spans):
        if isinstance(seg, HtmlTable) or (isinstance(seg, MATH_TYPES) and "\n" in text[a:b]):
            first = text.count("\n", 0, a)
            last = text.count("\n", 0, b)
            blocked.update(range(first, last + 1))
    return blocked


def _convert_tables(text):
    page = parse_page(text)
    lines = text.split("\n")
    blocked = _protected_lines(text, page)
    out, i = [], 0
    changed = False
    while i < len(lines):
        line = lines[i]
        if (
            "|" in line
            and i + 1 < len(lines)
            and i not in blocked
            and i + 1 not in blocked
            and not _is_separator(line)
            and _is_separator(lines[i + 1])
            and len(_split_cells(line)) == len(_split_cells(lines[i + 1]))
        ):
            header = _split_cells(line)
            j = i + 2
            rows = []
            while j < len(lines) and "|" in lines[j] and lines[j].strip() and j not in blocked:
                rows.append(_split_cells(lines[j]))
                j += 1
            out.append(_table_html(header, rows))
            changed = True
            i = j
            continue
        out.append(line)
        i += 1
    return "\n".join(out), changed


def _convert_sections(text):
    page = parse_page(text)
    edits = []
    for seg, (a, _b) in zip(page.segments, page.spans):
        if not isinstance(seg, Text):
            continue
        for m in _SECTION.finditer(seg.text):
            if _escaped(seg.text, m.start()):
                continue
            title = m.group(2).strip()
            if not title:
                continue
            start, end = a + m.start(), a + m.end()
            level = 1 + len(m.group(1)) // 3
            new = "#" * level + " " + title
            if start > 0 and text[start - 1] != "\n":
                new = "\n" + new
            if end < len(text) and text[end] != "\n":
                new += "\n"
            edits.append((start, end, new))
    if not edits:
        return text, False
    parts, prev = [], 0
    for start, end, new in edits:
        parts.append(text[prev:start])
        parts.append(new)
        prev = end
    parts.append(text[prev:])
    return "".join(parts), True


def count_unresolved(page):
    """LaTeX control words left in text or headings (outside math)."""
    n = 0
    for seg in page.segments:
        body = seg.text if isinstance(seg, (Text, Heading)) else None
        if body is None:
            continue
        n += sum(1 for m in _LATEX_CMD.finditer(body) if not _escaped(body, m.start()))
    return n


def convert_and_validate(text: str, allowlist=None, budget_seconds: float | None = DEFAULT_BUDGET_SECONDS,
                         clock=time.monotonic):
    """Convert sectioning commands and pipe tables, then validate.

    Returns the converted text and :class:`ConversionMetadata`. The conversion is
    repeated until it reaches a fixpoint, so feeding the output back in returns it
    unchanged. ``status`` is ``timeout`` if ``budget_seconds`` of wall-clock time
    elapse before the fixpoint is reached.
    """
    deadline = None if budget_seconds is None else clock() + budget_seconds
    out = text
    timed_out = False
    for _ in range(_MAX_PASSES):
        if deadline is not None and clock() > deadline:
            timed_out = True
            break
        new, t_changed = _convert_tables(out)
        new, s_changed = _convert_sections(new)
        out = new
        if not (t_changed or s_changed):
            break
    page = parse_page(out)
    unresolved = count_unresolved(page)
    missing_numbers = any(
        _MISSING_NUMBER.search(s.text) for s in page.segments if isinstance(s, (Text, Heading))
    )
    math_ok = all(validate_math(s.content, allowlist).valid for s in page.segments if isinstance(s, MATH_TYPES))
    if timed_out:
        status = STATUS_TIMEOUT
    elif unresolved or missing_numbers:
        status = STATUS_PARTIAL
    else:
        status = STATUS_SUCCESS
    return out, ConversionMetadata(status, unresolved, missing_numbers, math_ok)
