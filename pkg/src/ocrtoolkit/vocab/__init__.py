"""Byte-level BPE tokenizers and frequency-based vocabulary pruning."""
from .bpe import DEFAULT_PATTERN, BpeModel, byte_level_alphabet, bytes_to_unicode, train_bpe
from .estimator import VocabPruner
from .prune import (
    PRESET_TARGETS,
    IntegrityReport,
    PrunePlan,
    count_frequencies,
    dominant_script,
    emit_embedding_plan,
    merge_counts,
    propagate_frequencies,
    prune,
    verify_integrity,
    write_plan,
)

__all__ = [
    "DEFAULT_PATTERN", "PRESET_TARGETS", "BpeModel", "IntegrityReport", "PrunePlan", "VocabPruner",
    "byte_level_alphabet", "bytes_to_unicode", "count_frequencies", "dominant_script",
    "emit_embedding_plan", "merge_counts", "propagate_frequencies", "prune", "train_bpe",
    "verify_integrity", "write_plan",
]
