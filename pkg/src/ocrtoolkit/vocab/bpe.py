"""Byte-level BPE model: encoding, decoding, JSON I/O and training."""
from __future__ import annotations

import heapq
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import regex

from ..exceptions import DataError, TokenizationError

# GPT-2 pretokenization
DEFAULT_PATTERN = r"""'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+"""


@lru_cache(maxsize=1)
def bytes_to_unicode():
    """Reversible byte -> printable character table used by byte-level BPE."""
    bs = list(range(ord("!"), ord("~") + 1)) + list(range(ord("¡"), ord("¬") + 1)) + list(range(ord("®"), ord("ÿ") + 1))
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, map(chr, cs)))


@lru_cache(maxsize=1)
def _unicode_to_bytes():
    return {c: b for b, c in bytes_to_unicode().items()}


def byte_level_alphabet():
    return frozenset(bytes_to_unicode().values())


def _find_pattern(pre):
    """Pull a split regex out of a copied-through pre-tokenizer description."""
    if pre is None:
        return DEFAULT_PATTERN
    if isinstance(pre, str):
        return pre
    if isinstance(pre, dict):
        pat = pre.get("pattern")
        if isinstance(pat, str):
            return pat
        if isinstance(pat, dict) and isinstance(pat.get("Regex"), str):
            return pat["Regex"]
        for sub in pre.get("pretokenizers", ()):
            found = _find_pattern(sub)
            if found is not DEFAULT_PATTERN:
                return found
    return DEFAULT_PATTERN


@dataclass
class BpeModel:
    """Vocabulary, ordered merges and special tokens of a byte-level BPE.

    ``pre_tokenizer`` is kept verbatim from the source file. A regex found in
    it (``{"pattern": ...}`` or a ``Split`` step) drives pretokenization,
    otherwise the GPT-2 pattern is used.
    """

    vocab: dict
    merges: list
    specials: frozenset = frozenset()
    pre_tokenizer: object = None
    byte_level_base: frozenset = field(default_factory=byte_level_alphabet)

    def __post_init__(self):
        self.merges = [tuple(m) for m in self.merges]
        self.specials = frozenset(self.specials)
        self._validate()
        self.id_to_token = [None] * len(self.vocab)
        for tok, i in self.vocab.items():
            self.id_to_token[i] = tok
        self.ranks = {m: r for r, m in enumerate(self.merges)}
        self.special_strings = {self.id_to_token[i]: i for i in self.specials}
        self._split_re = regex.compile(_find_pattern(self.pre_tokenizer))
        self._special_re = (
            regex.compile("|".join(regex.escape(s) for s in sorted(self.special_strings, key=len, reverse=True)))
            if self.special_strings else None
        )
        self._cache = {}

    # -- structure ------------------------------------------------------------

    def _validate(self):
        ids = sorted(self.vocab.values())
        if ids != list(range(len(ids))):
            raise DataError("vocab ids must be dense in [0, |vocab|)", field="vocab")
        missing = [c for c in sorted(self.byte_level_base) if c not in self.vocab]
        if missing:
            raise DataError(f"{len(missing)} byte-level base tokens missing from vocab", field="vocab")
        n = len(self.vocab)
        if any(not (0 <= i < n) for i in self.specials):
            raise DataError("special token id out of range", field="special_tokens")
        produced = set(self.byte_level_base)
        seen_pairs = set()
        for r, (left, right) in enumerate(self.merges):
            if (left, right) in seen_pairs:
                raise DataError(f"merge {r} ({left!r}, {right!r}) is duplicated", field="merges")
            seen_pairs.add((left, right))
            for part in (left, right):
                if part not in produced:
                    raise DataError(f"merge {r}: {part!r} is not produced by an earlier merge", field="merges")
            out = left + right
            if out not in self.vocab:
                raise DataError(f"merge {r}: output {out!r} missing from vocab", field="merges")
            if out in produced:
                raise DataError(f"merge {r}: token {out!r} is produced more than once", field="merges")
            produced.add(out)
        special_tokens = {tok for tok, i in self.vocab.items() if i in self.specials}
        orphans = set(self.vocab) - produced - special_tokens
        if orphans:
            example = sorted(orphans)[0]
            raise DataError(f"{len(orphans)} token(s) not producible by merges, e.g. {example!r}", field="vocab")

    def __len__(self):
        return len(self.vocab)

    def constituents(self):
        """token id -> (left id, right id) for every merged token."""
        v = self.vocab
        return {v[a + b]: (v[a], v[b]) for a, b in self.merges}

    @property
    def base_ids(self):
        return frozenset(self.vocab[c] for c in self.byte_level_base)

    # -- encoding ---------------------------------------------------------------

    def _bpe(self, word):
        hit = self._cache.get(word)
        if hit is not None:
            return hit
        syms = list(word)
        ranks = self.ranks
        while len(syms) > 1:
            best = None
            best_rank = None
            for pair in zip(syms, syms[1:]):
                r = ranks.get(pair)
                if r is not None and (best_rank is None or r < best_rank):
                    best, best_rank = pair, r
            if best is None:
                break
            a, b = best
            merged = []
            i = 0
            while i < len(syms):
                if i + 1 < len(syms) and syms[i] == a and syms[i + 1] == b:
                    merged.append(a + b)
                    i += 2
                else:
                    merged.append(syms[i])
                    i += 1
            syms = merged
        out = tuple(self.vocab[s] for s in syms)
        if len(self._cache) < 200_000:
            self._cache[word] = out
        return out

    def _encode_plain(self, text, out):
        table = bytes_to_unicode()
        pos = 0
        for m in self._split_re.finditer(text):
            # unmatched gaps (possible with a custom pattern) become their own piece
            for piece in (text[pos:m.start()], m.group(0)):
                if piece:
                    out.extend(self._bpe("".join(table[b] for b in piece.encode("utf-8"))))
            pos = m.end()
        if pos < len(text):
            out.extend(self._bpe("".join(table[b] for b in text[pos:].encode("utf-8"))))

    def encode(self, text: str, doc_id=None) -> list:
        """Token ids for ``text``; special-token strings map to their ids."""
        if not isinstance(text, str):
            raise TokenizationError(f"expected str, got {type(text).__name__}", doc_id)
        out = []
        try:
            if self._special_re is None:
                self._encode_plain(text, out)
            else:
                pos = 0
                for m in self._special_re.finditer(text):
                    self._encode_plain(text[pos:m.start()], out)
                    out.append(self.special_strings[m.group(0)])
                    pos = m.end()
                self._encode_plain(text[pos:], out)
        except UnicodeEncodeError as exc:
            raise TokenizationError(f"text is not valid Unicode: {exc.reason}", doc_id) from None
        return out

    def decode(self, ids) -> str:
        inv = _unicode_to_bytes()
        buf = bytearray()
        for i in ids:
            tok = self.id_to_token[i]
            if i in self.specials:
                buf.extend(tok.encode("utf-8"))
            else:
                buf.extend(inv[c] for c in tok)
        return buf.decode("utf-8")

    # -- serialization ------------------------------------------------------------

    def to_dict(self):
        d = {
            "vocab": dict(sorted(self.vocab.items(), key=lambda kv: kv[1])),
            "merges": [f"{a} {b}" for a, b in self.merges],
            "special_tokens": [self.id_to_token[i] for i in sorted(self.specials)],
        }
        if self.pre_tokenizer is not None:
            d["pre_tokenizer"] = self.pre_tokenizer
        return d

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), ensure_ascii=False), encoding="utf-8")

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise DataError("tokenizer file must hold a JSON object")
        if "model" in d and "vocab" not in d:
            # Hugging Face tokenizer.json layout
            model = d["model"]
            specials = [t["content"] for t in d.get("added_tokens", ()) if t.get("special")]
            d = {"vocab": model.get("vocab"), "merges": model.get("merges"),
                 "special_tokens": specials, "pre_tokenizer": d.get("pre_tokenizer")}
        vocab = d.get("vocab")
        if not isinstance(vocab, dict):
            raise DataError("'vocab' must map token -> id", field="vocab")
        merges = []
        for r, m in enumerate(d.get("merges") or []):
            if isinstance(m, str):
                parts = m.split(" ")
            elif isinstance(m, (list, tuple)):
                parts = list(m)
            else:
                parts = []
            if len(parts) != 2:
                raise DataError(f"merge {r} must be 'left right', got {m!r}", field="merges")
            merges.append(tuple(parts))
        specials = []
        for s in d.get("special_tokens") or []:
            if s not in vocab:
                raise DataError(f"special token {s!r} not in vocab", field="special_tokens")
            specials.append(vocab[s])
        return cls(dict(vocab), merges, frozenset(specials), d.get("pre_tokenizer"))

    @classmethod
    def load(cls, path):
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(data)


def train_bpe(texts, vocab_size, special_tokens=(), pattern=DEFAULT_PATTERN) -> BpeModel:
    """Learn a byte-level BPE with at most ``vocab_size`` tokens.

    Specials take the first ids, then the 256 byte symbols, then merges.
    Pair ties break by the lexicographically smaller pair.
    """
    split_re = regex.compile(pattern)
    table = bytes_to_unicode()
    words = Counter()
    for text in texts:
        for piece in split_re.findall(text):
            words["".join(table[b] for b in piece.encode("utf-8"))] += 1

    vocab = {}
    for s in special_tokens:
        vocab.setdefault(s, len(vocab))
    for b in range(256):
        vocab[table[b]] = len(vocab)
    if len(vocab) > vocab_size:
        raise ValueError(f"vocab_size must be at least {len(vocab)}")

    seqs = [list(w) for w in words]
    freqs = list(words.values())
    pair_counts = defaultdict(int)
    where = defaultdict(set)
    for wi, seq in enumerate(seqs):
        for pair in zip(seq, seq[1:]):
            pair_counts[pair] += freqs[wi]
            where[pair].add(wi)
    heap = [(-c, p) for p, c in pair_counts.items()]
    heapq.heapify(heap)
    merges = []

    while len(vocab) < vocab_size and heap:
        negc, pair = heapq.heappop(heap)
        if pair_counts.get(pair, 0) != -negc or negc == 0:
            continue
        a, b = pair
        new = a + b
        merges.append(pair)
        vocab[new] = len(vocab)
        touched = {}
        for wi in sorted(where.pop(pair, ())):
            seq, f = seqs[wi], freqs[wi]
            for p in zip(seq, seq[1:]):
                pair_counts[p] -= f
                touched[p] = None
            merged, i = [], 0
            while i < len(seq):
                if i + 1 < len(seq) and seq[i] == a and seq[i + 1] == b:
                    merged.append(new)
                    i += 2
                else:
                    merged.append(seq[i])
                    i += 1
            seqs[wi] = merged
            for p in zip(merged, merged[1:]):
                pair_counts[p] += f
                where[p].add(wi)
                touched[p] = None
        pair_counts.pop(pair, None)
        for p in touched:
            c = pair_counts.get(p, 0)
            if c > 0:
                heapq.heappush(heap, (-c, p))
            else:
                pair_counts.pop(p, None)
    pre = None if pattern == DEFAULT_PATTERN else {"type": "regex", "pattern": pattern}
    return BpeModel(vocab, merges, frozenset(vocab[s] for s in special_tokens), pre)
