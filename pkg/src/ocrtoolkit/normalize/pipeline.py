"""Per-document normalization pipeline and corpus assembly helpers."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from ..markup import parse_page
from .convert import DEFAULT_BUDGET_SECONDS, STATUS_SUCCESS, convert_and_validate
from .dedup import CorpusRecord
from .loops import DEFAULT_LOOP_THRESHOLD, MIN_LOOP_BYTES, detect_loops
from .text import (CASE_BLANK_PAGE, CASE_NONE, NormalizationReport, canonicalize_special_pages,
                   compile_watermark_patterns, remove_watermarks, sanitize)


@dataclass
class NormalizeConfig:
    watermark_patterns: tuple = ()
    page_area_fraction: float = 0.95  # coverage needed to count as a full-page image
    loop_threshold: float = DEFAULT_LOOP_THRESHOLD
    min_loop_length: int = MIN_LOOP_BYTES
    convert_budget_seconds: float | None = DEFAULT_BUDGET_SECONDS
    allowlist: object = None
    _compiled: list = field(default=None, repr=False, compare=False)

    def patterns(self):
        if self._compiled is None:
            self._compiled = compile_watermark_patterns(self.watermark_patterns)
        return self._compiled


@dataclass
class NormalizedDocument:
    record: CorpusRecord
    report: dict

    @property
    def text(self):
        return self.record.text


def normalize_document(text, config=None, doc_id="", source="") -> NormalizedDocument:
    """watermarks -> sanitize -> special pages -> LaTeX conversion -> loop check."""
    cfg = config or NormalizeConfig()
    report = NormalizationReport()
    text, removed = remove_watermarks(text, cfg.patterns())
    report.removed_watermarks = removed
    if removed:
        report.note("remove_watermarks")
    text, _ = sanitize(text, report)
    text, _ = canonicalize_special_pages(parse_page(text), cfg.page_area_fraction, report)
    meta = None
    if report.canonical_case == CASE_NONE:
        converted, meta = convert_and_validate(text, cfg.allowlist, cfg.convert_budget_seconds)
        if converted != text:
            report.note("latex_conversion")
            text, _ = sanitize(converted, report)
    loops = detect_loops(text, cfg.loop_threshold, cfg.min_loop_length)
    if loops.warning and report.canonical_case != CASE_BLANK_PAGE:
        report.warnings.append(loops.warning)
    sidecar = {
        "doc_id": doc_id,
        "transforms_applied": list(report.transforms_applied),
        "canonical_case": report.canonical_case,
        "status": meta.status if meta else STATUS_SUCCESS,
        "unresolved_references": meta.unresolved_references if meta else 0,
        "missing_figure_numbering": meta.missing_figure_numbering if meta else False,
        "math_compatible": meta.math_compatible if meta else True,
        "removed_watermarks": report.removed_watermarks,
        "compression_ratio": loops.compression_ratio,
        "flagged": loops.flagged,
        "warnings": list(report.warnings),
    }
    return NormalizedDocument(CorpusRecord.from_text(doc_id, text, source), sidecar)


def keep_empty_page(doc_id: str, rate: float, seed: int = 0) -> bool:
    """Deterministic Bernoulli(rate) draw keyed on the document id."""
    h = hashlib.blake2b(f"{seed}:{doc_id}".encode(), digest_size=8).digest()
    return int.from_bytes(h, "little") / 2.0**64 < rate
