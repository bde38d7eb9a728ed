"""Hypothesis strategies for canonical-format segments and boxes."""
from hypothesis import strategies as st

from ocrtoolkit.markup import (BBox, DisplayMath, Heading, HtmlTable, Image, ImageRef, InlineMath, Text)

coord = st.integers(0, 1000)


@st.composite
def bboxes(draw):
    x1, x2 = sorted((draw(coord), draw(coord)))
    y1, y2 = sorted((draw(coord), draw(coord)))
    return BBox(x1, y1, x2, y2)


_TEXT_CHARS = st.sampled_from(list("abcXYZ019 .,;:-()*_\n") + ["é", "中", "ß"])
_SUFFIX_START = set("-+0123456789.,")

plain_text = st.text(_TEXT_CHARS, min_size=1, max_size=30)
_MATH_TOKENS = st.sampled_from(["x", "y", "^", "_", "{", "}", "2", "+", " ", "\\frac", "\\alpha", "=", "a\\\\"])
math_content = st.lists(_MATH_TOKENS, max_size=8).map("".join)
heading_text = st.text(st.sampled_from(list("abc XYZ12#é")), min_size=1, max_size=20).filter(lambda s: s.strip())

segment = st.one_of(
    plain_text.map(Text),
    math_content.map(InlineMath),
    math_content.map(DisplayMath),
    st.builds(lambda i, b: Image(ImageRef(i, b)), st.integers(1, 99), st.none() | bboxes()),
    plain_text.filter(lambda s: "\n" not in s).map(lambda s: HtmlTable(f"<table><tr><td>{s}</td></tr></table>")),
    st.builds(Heading, st.integers(1, 6), heading_text),
)


def _valid(segs):
    for a, b in zip(segs, segs[1:]):
        if isinstance(a, Text) and isinstance(b, Text):
            return False
        if isinstance(a, Image) and isinstance(b, Text) and b.text[0] in _SUFFIX_START:
            return False
    return True


segment_lists = st.lists(segment, max_size=8).filter(_valid)
