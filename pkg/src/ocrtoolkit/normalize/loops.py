"""Compression-ratio detector for degenerate, looping generations."""
from __future__ import annotations

import zlib
from dataclasses import dataclass

from .._validation import check_fraction

DEFAULT_LOOP_THRESHOLD = 0.13
MIN_LOOP_BYTES = 200


def deflate_ratio(data: bytes) -> float:
    """Raw DEFLATE (RFC 1951, default level) size over input size; 1.0 for empty input."""
    if not data:
        return 1.0
    comp = zlib.compressobj(zlib.Z_DEFAULT_COMPRESSION, zlib.DEFLATED, -15)
    size = len(comp.compress(data)) + len(comp.flush())
    return size / len(data)


@dataclass(frozen=True)
class LoopReport:
    compression_ratio: float
    flagged: bool
    threshold: float
    eligible: bool = True
    warning: str | None = None

    def to_dict(self):
        return {
            "compression_ratio": self.compression_ratio,
            "flagged": self.flagged,
            "threshold": self.threshold,
            "eligible": self.eligible,
            "warning": self.warning,
        }


def detect_loops(text: str, threshold: float = DEFAULT_LOOP_THRESHOLD,
                 min_length: int = MIN_LOOP_BYTES) -> LoopReport:
    """Flag ``text`` when its DEFLATE ratio is below ``threshold``.

    Texts shorter than ``min_length`` UTF-8 bytes are never flagged: the fixed
    compression overhead dominates there. For eligible texts
    ``flagged == (compression_ratio < threshold)``.
    """
    threshold = check_fraction(threshold, "threshold", include_low=False, include_high=False)
    data = text.encode("utf-8", "surrogatepass")
    ratio = deflate_ratio(data)
    if len(data) < min_length:
        return LoopReport(ratio, False, threshold, eligible=False,
                          warning=f"text shorter than {min_length} bytes; not scored")
    return LoopReport(ratio, ratio < threshold, threshold)
