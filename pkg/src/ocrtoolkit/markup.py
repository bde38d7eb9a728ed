"""Parsing and serialization of the canonical OCR transcription format.

A transcription is markdown with a few constrained constructs:

* ``# Heading`` lines (levels 1-6),
* HTML ``<table>...</table>`` blocks,
* math spans delimited by ``$...$``, ``$$...$$``, ``\\(...\\)`` or ``\\[...\\]``,
* image placeholders ``![image](image_N.png)`` with an optional bounding-box
  suffix ``x1,y1,x2,y2`` (integers in ``[0, 1000]``, no whitespace).

Everything else is plain text. Parsing is total: constructs that do not match
the grammar are kept as text and reported as :class:`ParseWarning` records.

Serialization canonicalizes two things, which is the only way ``raw`` and
``serialize_page(parse_page(raw))`` can differ:

* math delimiters are written as ``$``/``$$`` whenever the content allows it
  (``\\(`` / ``\\[`` otherwise);
* exactly one newline separates a heading from its neighbours; a trailing
  newline after a final heading is dropped.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

COORD_MAX = 1000

_HEADING_RE = re.compile(r"(#{1,6}) ([^\n]*\S[^\n]*)")
_IMAGE_RE = re.compile(r"!\[image\]\(image_(\d+)\.png\)")
_SUFFIX_RE = re.compile(r"[-+0-9.,]*[0-9]")
_CANONICAL_INT = re.compile(r"0|[1-9][0-9]*")
_SIGNED_INT = re.compile(r"[-+]?[0-9]+")


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in page coordinates scaled to ``[0, 1000]``."""

    x1: int
    y1: int
    x2: int
    y2: int

    def __post_init__(self):
        for name in ("x1", "y1", "x2", "y2"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int):
                raise TypeError(f"{name} must be an int, got {type(v).__name__}")
            if not 0 <= v <= COORD_MAX:
                raise ValueError(f"{name}={v} outside [0, {COORD_MAX}]")
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise ValueError(f"inverted box {self.as_tuple()}")

    @classmethod
    def from_sequence(cls, coords):
        if len(coords) != 4:
            raise ValueError(f"expected 4 coordinates, got {len(coords)}")
        vals = [int(c) if isinstance(c, float) and c.is_integer() else c for c in coords]
        return cls(*vals)

    @property
    def area(self) -> int:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    @property
    def is_degenerate(self) -> bool:
        return self.x1 == self.x2 or self.y1 == self.y2

    def as_tuple(self):
        return (self.x1, self.y1, self.x2, self.y2)

    def __str__(self):
        return f"{self.x1},{self.y1},{self.x2},{self.y2}"


@dataclass(frozen=True)
class ImageRef:
    id: int
    bbox: Optional[BBox] = None

    def __post_init__(self):
        if isinstance(self.id, bool) or not isinstance(self.id, int) or self.id < 1:
            raise ValueError(f"image id must be a positive int, got {self.id!r}")

    def serialize(self) -> str:
        s = f"![image](image_{self.id}.png)"
        return s if self.bbox is None else s + str(self.bbox)


@dataclass(frozen=True)
class Text:
    text: str


@dataclass(frozen=True)
class InlineMath:
    content: str


@dataclass(frozen=True)
class DisplayMath:
    content: str


@dataclass(frozen=True)
class Image:
    ref: ImageRef

    @property
    def id(self):
        return self.ref.id

    @property
    def bbox(self):
        return self.ref.bbox


@dataclass(frozen=True)
class HtmlTable:
    html: str


@dataclass(frozen=True)
class Heading:
    level: int
    text: str

    def __post_init__(self):
        if not 1 <= self.level <= 6:
            raise ValueError(f"heading level must be in 1..6, got {self.level}")
        if "\n" in self.text or not self.text.strip():
            raise ValueError("heading text must be a non-blank single line")


Segment = Union[Text, InlineMath, DisplayMath, Image, HtmlTable, Heading]
MATH_TYPES = (InlineMath, DisplayMath)


@dataclass(frozen=True)
class ParseWarning:
    offset: int  # UTF-8 byte offset into the raw page
    category: str
    message: str

    def to_dict(self):
        return {"offset": self.offset, "category": self.category, "message": self.message}


@dataclass(frozen=True)
class PageOutput:
    raw: str
    segments: tuple
    terminated_with_eos: bool = False
    warnings: tuple = field(default=(), compare=False)
    # (start, end) character offsets of each segment in ``raw``
    spans: tuple = field(default=(), compare=False, repr=False)

    @classmethod
    def from_segments(cls, segments, terminated_with_eos=True):
        raw = serialize_segments(segments)
        return parse_page(raw, terminated_with_eos)

    def byte_offset(self, char_index: int) -> int:
        return len(self.raw[:char_index].encode("utf-8", "surrogatepass"))

    @property
    def images(self):
        return [s.ref for s in self.segments if isinstance(s, Image)]


class _Parser:
    def __init__(self, raw):
        self.raw = raw
        self.n = len(raw)
        self.i = 0
        self.segments = []
        self.spans = []
        self.warnings = []  # (char offset, category, message)
        self.buf = []
        self.buf_start = 0

    def warn(self, pos, category, message):
        self.warnings.append((pos, category, message))

    def push_text(self, s):
        if not self.buf:
            self.buf_start = self.i
        self.buf.append(s)

    def flush(self, end, strip_separator=False):
        if not self.buf:
            return
        text = "".join(self.buf)
        self.buf = []
        if strip_separator and text.endswith("\n"):
            text = text[:-1]
            end -= 1
        if text:
            self.segments.append(Text(text))
            self.spans.append((self.buf_start, end))

    def emit(self, seg, start, end):
        self.flush(start)
        self.segments.append(seg)
        self.spans.append((start, end))

    def find_unescaped(self, token, start, stop_at_newline=False):
        raw, k = self.raw, start
        while k < self.n:
            c = raw[k]
            if c == "\\":
                k += 2
                continue
            if stop_at_newline and c == "\n":
                return -1
            if raw.startswith(token, k):
                return k
            k += 1
        return -1

    def run(self):
        raw = self.raw
        while self.i < self.n:
            i = self.i
            if i == 0 or raw[i - 1] == "\n":
                m = _HEADING_RE.match(raw, i)
                if m:
                    self.heading(m)
                    continue
            c = raw[i]
            if c == "\\":
                self.backslash()
            elif c == "$":
                self.dollar()
            elif c == "!" and raw.startswith("![image](", i):
                self.image()
            elif c == "<" and raw.startswith("<table", i) and raw[i + 6:i + 7] in (">", " ", "\n", "\t"):
                self.table()
            else:
                self.push_text(c)
                self.i += 1
        self.flush(self.n)
        return self.segments, self.spans, self.warnings

    def heading(self, m):
        start = m.start()
        self.flush(start, strip_separator=start > 0)
        self.segments.append(Heading(len(m.group(1)), m.group(2)))
        self.spans.append((start, m.end()))
        self.i = m.end()
        if self.raw.startswith("\n", self.i):
            self.i += 1

    def backslash(self):
        raw, i = self.raw, self.i
        nxt = raw[i + 1:i + 2]
        if nxt in ("(", "["):
            close = "\\)" if nxt == "(" else "\\]"
            j = raw.find(close, i + 2)
            if j < 0:
                self.warn(i, "unbalanced_delimiter", f"unclosed \\{nxt}")
                self.push_text("\\" + nxt)
                self.i += 2
                return
            kind = InlineMath if nxt == "(" else DisplayMath
            self.emit(kind(raw[i + 2:j]), i, j + 2)
            self.i = j + 2
        elif nxt:
            self.push_text("\\" + nxt)
            self.i += 2
        else:
            self.push_text("\\")
            self.i += 1

    def dollar(self):
        raw, i = self.raw, self.i
        if raw.startswith("$$", i):
            j = self.find_unescaped("$$", i + 2)
            if j < 0:
                self.warn(i, "unbalanced_delimiter", "unclosed $$")
                self.push_text("$$")
                self.i += 2
                return
            self.emit(DisplayMath(raw[i + 2:j]), i, j + 2)
            self.i = j + 2
            return
        j = self.find_unescaped("$", i + 1, stop_at_newline=True)
        if j < 0:
            self.warn(i, "unbalanced_delimiter", "unclosed $")
            self.push_text("$")
            self.i += 1
            return
        self.emit(InlineMath(raw[i + 1:j]), i, j + 1)
        self.i = j + 1

    def image(self):
        raw, i = self.raw, self.i
        m = _IMAGE_RE.match(raw, i)
        if not m:
            self.push_text("!")
            self.i += 1
            return
        id_str = m.group(1)
        if not _CANONICAL_INT.fullmatch(id_str) or int(id_str) < 1:
            self.warn(i, "image_id", f"invalid image id {id_str!r}")
            self.push_text(m.group(0))
            self.i = m.end()
            return
        ref_id = int(id_str)
        s = _SUFFIX_RE.match(raw, m.end())
        if not s:
            self.emit(Image(ImageRef(ref_id)), i, m.end())
            self.i = m.end()
            return
        bbox, problem = _parse_bbox_suffix(s.group(0))
        if bbox is None:
            self.warn(i, "malformed_bbox", problem)
            self.push_text(raw[i:s.end()])
        else:
            if bbox.is_degenerate:
                self.warn(i, "degenerate_bbox", "zero-area box")
            self.emit(Image(ImageRef(ref_id, bbox)), i, s.end())
        self.i = s.end()

    def table(self):
        raw, i = self.raw, self.i
        j = raw.find("</table>", i)
        if j < 0:
            self.warn(i, "unclosed_table", "<table> without </table>")
            self.push_text("<")
            self.i += 1
            return
        self.emit(HtmlTable(raw[i:j + 8]), i, j + 8)
        self.i = j + 8


def _parse_bbox_suffix(suffix):
    parts = suffix.split(",")
    if len(parts) != 4:
        return None, f"expected 4 coordinates, got {len(parts)}"
    if not all(p.isascii() and p.isdigit() for p in parts):
        if all(_SIGNED_INT.fullmatch(p) for p in parts):
            return None, "coordinate out of range"
        return None, "non-integer coordinate"
    if not all(_CANONICAL_INT.fullmatch(p) for p in parts):
        return None, "non-canonical integer (leading zero)"
    x1, y1, x2, y2 = (int(p) for p in parts)
    if max(x1, y1, x2, y2) > COORD_MAX:
        return None, "coordinate out of range"
    if x1 > x2 or y1 > y2:
        return None, "inverted box (x1 > x2 or y1 > y2)"
    return BBox(x1, y1, x2, y2), None


def parse_page(raw: str, eos_seen: bool = False) -> PageOutput:
    """Parse a model transcription into segments. Never raises on string input."""
    segments, spans, warns = _Parser(raw).run()
    if warns:
        # single pass char->byte conversion
        positions = sorted({w[0] for w in warns})
        byte_at, b, prev = {}, 0, 0
        for p in positions:
            b += len(raw[prev:p].encode("utf-8", "surrogatepass"))
            byte_at[p] = b
            prev = p
        warns = [ParseWarning(byte_at[pos], cat, msg) for pos, cat, msg in warns]
    return PageOutput(raw, tuple(segments), bool(eos_seen), tuple(warns), tuple(spans))


def _trailing_backslashes(s):
    return len(s) - len(s.rstrip("\\"))


def _dollar_safe(content, token):
    if content.startswith("$") or content.endswith("$") or _trailing_backslashes(content) % 2:
        return False
    k = 0
    while k < len(content):
        if content[k] == "\\":
            k += 2
            continue
        if content.startswith(token, k):
            return False
        k += 1
    return True


def _serialize_math(seg):
    c = seg.content
    if isinstance(seg, InlineMath):
        if c and "\n" not in c and _dollar_safe(c, "$"):
            return f"${c}$"
        return f"\\({c}\\)"
    if c and _dollar_safe(c, "$$"):
        return f"$${c}$$"
    return f"\\[{c}\\]"


def serialize_segments(segments) -> str:
    out = []
    last = len(segments) - 1
    prev = None
    for k, seg in enumerate(segments):
        if isinstance(seg, Heading):
            if prev is not None and not isinstance(prev, Heading):
                out.append("\n")
            out.append("#" * seg.level + " " + seg.text)
            if k < last:
                out.append("\n")
        elif isinstance(seg, Text):
            out.append(seg.text)
        elif isinstance(seg, MATH_TYPES):
            out.append(_serialize_math(seg))
        elif isinstance(seg, Image):
            out.append(seg.ref.serialize())
        elif isinstance(seg, HtmlTable):
            out.append(seg.html)
        else:
            raise TypeError(f"not a segment: {seg!r}")
        prev = seg
    return "".join(out)


def serialize_page(page: PageOutput) -> str:
    return serialize_segments(page.segments)


def extract_math_spans(page: PageOutput):
    """Return ``[(content, "inline" | "display"), ...]`` in page order."""
    return [
        (s.content, "inline" if isinstance(s, InlineMath) else "display")
        for s in page.segments
        if isinstance(s, MATH_TYPES)
    ]
