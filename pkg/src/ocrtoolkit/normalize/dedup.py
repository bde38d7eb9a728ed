"""Exact deduplication on normalized text."""
from __future__ import annotations

import hashlib
from collections import defaultdict
from dataclasses import dataclass, field


def stable_hash(text: str) -> str:
    """64-bit BLAKE2b digest of the UTF-8 bytes, as 16 hex characters."""
    return hashlib.blake2b(text.encode("utf-8", "surrogatepass"), digest_size=8).hexdigest()


@dataclass(frozen=True)
class CorpusRecord:
    doc_id: str
    text: str
    source: str = ""
    normalized_hash: str = ""

    @classmethod
    def from_text(cls, doc_id, text, source=""):
        return cls(doc_id, text, source, stable_hash(text))

    def to_dict(self):
        return {"doc_id": self.doc_id, "source": self.source, "text": self.text}


@dataclass
class DedupStats:
    kept: int = 0
    dropped: int = 0
    per_source: dict = field(default_factory=lambda: defaultdict(lambda: {"kept": 0, "dropped": 0}))

    def to_dict(self):
        return {"kept": self.kept, "dropped": self.dropped,
                "per_source": {k: dict(v) for k, v in sorted(self.per_source.items())}}


class Deduplicator:
    """Keeps the first record seen for every normalized hash (input order)."""

    def __init__(self):
        self.seen = set()
        self.stats = DedupStats()

    def filter(self, records):
        for rec in records:
            key = rec.normalized_hash or stable_hash(rec.text)
            src = self.stats.per_source[rec.source]
            if key in self.seen:
                self.stats.dropped += 1
                src["dropped"] += 1
                continue
            self.seen.add(key)
            self.stats.kept += 1
            src["kept"] += 1
            yield rec


def dedup(records):
    d = Deduplicator()
    kept = list(d.filter(records))
    return kept, d.stats
