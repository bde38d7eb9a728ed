"""Frequency-based BPE vocabulary pruning that keeps the tokenizer total."""
from __future__ import annotations

import json
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .._validation import check_positive_int
from ..exceptions import InfeasibleTargetError
from .bpe import BpeModel

# rounded size labels -> exact targets
PRESET_TARGETS = {"51k": 51200, "32k": 32768, "16k": 16384}


def _documents(corpus):
    """Yield ``(doc_id, text)`` from strings, pairs or ``{"doc_id", "text"}`` dicts."""
    for i, doc in enumerate(corpus):
        if isinstance(doc, str):
            yield str(i), doc
        elif isinstance(doc, dict):
            yield str(doc.get("doc_id", i)), doc.get("text")
        else:
            doc_id, text = doc
            yield str(doc_id), text


def count_frequencies(corpus, model: BpeModel) -> np.ndarray:
    """Direct token counts over ``corpus`` as an int64 array indexed by id."""
    counts = np.zeros(len(model), dtype=np.int64)
    for doc_id, text in _documents(corpus):
        ids = model.encode(text, doc_id=doc_id)
        if ids:
            counts += np.bincount(ids, minlength=len(model))
    return counts


def merge_counts(tables):
    """Sum per-shard count arrays (order does not matter)."""
    tables = list(tables)
    if not tables:
        raise ValueError("no count tables to merge")
    return np.sum(tables, axis=0, dtype=np.int64)


def propagate_frequencies(direct, model: BpeModel) -> np.ndarray:
    """Push every token's count down to both constituents, in reverse merge order."""
    prop = np.array(direct, dtype=np.int64, copy=True)
    if prop.shape != (len(model),):
        raise ValueError(f"expected {len(model)} counts, got shape {prop.shape}")
    if (prop < 0).any():
        raise ValueError("counts must be non-negative")
    v = model.vocab
    for a, b in reversed(model.merges):
        c = prop[v[a + b]]
        if c:
            prop[v[a]] += c
            prop[v[b]] += c
    return prop


@dataclass
class PrunePlan:
    keep_old_ids: list
    remap: dict
    model: BpeModel

    @property
    def embedding_rows_to_keep(self):
        return list(self.keep_old_ids)

    def to_dict(self):
        return {"keep_old_ids": list(self.keep_old_ids),
                "remap": {str(k): v for k, v in self.remap.items()}}


def _closure_additions(tok, parts, kept):
    todo, add = [tok], []
    seen = set()
    while todo:
        t = todo.pop()
        if t in kept or t in seen:
            continue
        seen.add(t)
        add.append(t)
        todo.extend(parts.get(t, ()))
    return add


def prune(model: BpeModel, propagated, target: int) -> PrunePlan:
    """Keep specials, the byte alphabet and the most frequent tokens, closed under merges.

    Optional tokens are visited by decreasing propagated count (ties: lower
    id). Each one enters together with any missing constituents; the first
    token whose closure does not fit ends the selection, so a larger target
    always keeps a superset.
    """
    target = check_positive_int(target, "target")
    n = len(model)
    freq = np.asarray(propagated)
    if freq.shape != (n,):
        raise ValueError(f"expected {n} frequencies, got shape {freq.shape}")
    mandatory = set(model.specials) | set(model.base_ids)
    if target < len(mandatory):
        raise InfeasibleTargetError(
            f"target {target} is below the {len(mandatory)} mandatory tokens (specials + byte alphabet)",
            minimal_size=len(mandatory),
        )
    if target >= n:
        kept = set(range(n))
    else:
        parts = model.constituents()
        kept = set(mandatory)
        order = sorted((i for i in range(n) if i not in kept), key=lambda i: (-int(freq[i]), i))
        for tok in order:
            add = _closure_additions(tok, parts, kept)
            if len(kept) + len(add) > target:
                break
            kept.update(add)
    keep = sorted(kept)
    remap = {old: new for new, old in enumerate(keep)}
    old_tok = model.id_to_token
    vocab = {old_tok[old]: new for old, new in remap.items()}
    merges = [(a, b) for a, b in model.merges if a + b in vocab]
    new_model = BpeModel(vocab, merges, frozenset(remap[i] for i in model.specials), model.pre_tokenizer)
    return PrunePlan(keep, remap, new_model)


def dominant_script(text: str) -> str:
    """Unicode script of the majority of letters (first word of the character name)."""
    scripts = Counter()
    for ch in text:
        if unicodedata.category(ch).startswith("L"):
            name = unicodedata.name(ch, "")
            scripts[name.split(" ", 1)[0] if name else "UNKNOWN"] += 1
    if not scripts:
        return "COMMON"
    return min(scripts.items(), key=lambda kv: (-kv[1], kv[0]))[0]


@dataclass
class ScriptStats:
    documents: int = 0
    old_tokens: int = 0
    new_tokens: int = 0

    @property
    def inflation(self):
        return self.new_tokens / self.old_tokens if self.old_tokens else 1.0

    def to_dict(self):
        return {"documents": self.documents, "old_tokens": self.old_tokens,
                "new_tokens": self.new_tokens, "inflation": self.inflation}


@dataclass
class IntegrityReport:
    totals: ScriptStats = field(default_factory=ScriptStats)
    per_script: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.failures

    @property
    def inflation(self):
        return self.totals.inflation

    def to_dict(self):
        return {
            "ok": self.ok,
            "failures": list(self.failures),
            **self.totals.to_dict(),
            "per_script": {k: v.to_dict() for k, v in sorted(self.per_script.items())},
        }


def verify_integrity(old: BpeModel, plan: PrunePlan, corpus) -> IntegrityReport:
    """Round-trip every document through the pruned model and measure inflation."""
    new = plan.model
    rep = IntegrityReport()
    for doc_id, text in _documents(corpus):
        new_ids = new.encode(text, doc_id=doc_id)
        try:
            ok = new.decode(new_ids) == text
        except UnicodeDecodeError:
            ok = False
        if not ok:
            rep.failures.append(doc_id)
        n_old = len(old.encode(text, doc_id=doc_id))
        bucket = rep.per_script.setdefault(dominant_script(text), ScriptStats())
        for s in (rep.totals, bucket):
            s.documents += 1
            s.old_tokens += n_old
            s.new_tokens += len(new_ids)
    return rep


def emit_embedding_plan(plan: PrunePlan, path=None):
    """Old embedding rows to keep, in new-id order; optionally written one per line."""
    rows = plan.embedding_rows_to_keep
    if path is not None:
        Path(path).write_text("".join(f"{r}\n" for r in rows), encoding="utf-8")
    return rows


def write_plan(plan: PrunePlan, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plan.model.save(out / "tokenizer.json")
    (out / "prune_plan.json").write_text(json.dumps(plan.to_dict()), encoding="utf-8")
    emit_embedding_plan(plan, out / "embedding_rows.txt")
    return out

