"""Streaming JSONL reading with line-numbered schema checks."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .exceptions import ConfigError, DataError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Field:
    types: tuple
    required: bool = True


def _f(*types, required=True):
    return Field(tuple(types), required)


CORPUS_SCHEMA = {"doc_id": _f(str), "text": _f(str), "source": _f(str, required=False)}
ROLLOUT_SCHEMA = {"doc_id": _f(str), "output": _f(str), "eos": _f(bool),
                  "gt_boxes": _f(dict, list, type(None), required=False)}
TESTS_SCHEMA = {"doc_id": _f(str), "tests": _f(list)}
BOXES_SCHEMA = {"doc_id": _f(str), "subset": _f(str, required=False), "boxes": _f(list)}
GENERATION_SCHEMA = {"doc_id": _f(str, required=False), "text": _f(str, required=False),
                     "output": _f(str, required=False)}

_TYPE_NAMES = {str: "string", bool: "boolean", int: "integer", float: "number", list: "array",
               dict: "object", type(None): "null"}


class SkipCounter:
    """Counts lines dropped under ``skip_bad``."""

    def __init__(self):
        self.skipped = 0
        self.messages = []


def check_record(obj, schema, line=None):
    if not isinstance(obj, dict):
        raise DataError("expected a JSON object", line=line)
    for name, spec in schema.items():
        if name not in obj:
            if spec.required:
                raise DataError(f"missing field {name!r}", line=line, field=name)
            continue
        value = obj[name]
        # bool is an int subclass; only accept it where declared
        ok = any(type(value) is t or (t is float and type(value) is int) for t in spec.types)
        if not ok:
            want = " or ".join(_TYPE_NAMES.get(t, t.__name__) for t in spec.types)
            raise DataError(f"field {name!r} must be {want}", line=line, field=name)
    return obj


def load_jsonl(path, schema=None, skip_bad=False, counter=None, numbered=False):
    """Yield records from a JSONL file one line at a time.

    Blank lines are ignored. A malformed line raises :class:`DataError` with
    its 1-based line number, unless ``skip_bad`` is set, in which case it is
    logged and counted in ``counter``. With ``numbered`` the stream yields
    ``(line_number, record)`` pairs.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"input file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                try:
                    obj = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise DataError(f"invalid JSON: {exc.msg}", line=lineno) from None
                if schema is not None:
                    check_record(obj, schema, lineno)
            except DataError as exc:
                if not skip_bad:
                    err = DataError(f"{path}: {exc}", field=exc.field)
                    err.line = exc.line
                    raise err from None
                log.warning("%s: skipping bad line: %s", path, exc)
                if counter is not None:
                    counter.skipped += 1
                    counter.messages.append(str(exc))
                continue
            yield (lineno, obj) if numbered else obj


def write_jsonl(records, fh):
    n = 0
    for rec in records:
        fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True))
        fh.write("\n")
        n += 1
    return n
