"""Canonical-format normalization: sanitization, special pages, loops, dedup, conversion."""
from .convert import ConversionMetadata, convert_and_validate
from .dedup import CorpusRecord, DedupStats, Deduplicator, dedup, stable_hash
from .estimators import LoopDetector, TextNormalizer
from .loops import DEFAULT_LOOP_THRESHOLD, LoopReport, deflate_ratio, detect_loops
from .pipeline import NormalizeConfig, NormalizedDocument, keep_empty_page, normalize_document
from .text import (FULL_PAGE_PLACEHOLDER, NormalizationReport, canonicalize_special_pages,
                   compile_watermark_patterns, remove_watermarks, sanitize)

__all__ = [
    "ConversionMetadata", "convert_and_validate", "CorpusRecord", "DedupStats", "Deduplicator",
    "dedup", "stable_hash", "LoopDetector", "TextNormalizer", "DEFAULT_LOOP_THRESHOLD",
    "LoopReport", "deflate_ratio", "detect_loops", "NormalizeConfig", "NormalizedDocument",
    "keep_empty_page", "normalize_document", "FULL_PAGE_PLACEHOLDER", "NormalizationReport",
    "canonicalize_special_pages", "compile_watermark_patterns", "remove_watermarks", "sanitize",
]
