"""Command-line entry point: ``ocrtoolkit <subcommand> ...``.

Exit codes: 0 success, 1 bad input data, 2 bad configuration or usage.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from contextlib import contextmanager
from functools import partial
from pathlib import Path

from . import __version__
from ._parallel import ordered_map
from ._validation import check_fraction, check_positive_int, check_weights
from .bbox_eval import DEFAULT_IOU_THRESHOLD, MATCHING_METHODS, MEAN_IOU_MODES, PageBoxes, evaluate_corpus, pair_pages
from .exceptions import (ConfigError, DataError, InfeasibleTargetError, MergeError, NoRewardSignal, OcrToolkitError,
                         TokenizationError)
from .io import (BOXES_SCHEMA, CORPUS_SCHEMA, GENERATION_SCHEMA, ROLLOUT_SCHEMA, TESTS_SCHEMA, SkipCounter,
                 load_jsonl, write_jsonl)
from .mathcheck import load_allowlist
from .merge import MergeSpec, alpha_sweep, load_archive, save_archive, soup, task_arithmetic
from .normalize.loops import DEFAULT_LOOP_THRESHOLD, MIN_LOOP_BYTES, detect_loops
from .normalize.pipeline import NormalizeConfig, keep_empty_page, normalize_document
from .normalize.dedup import Deduplicator
from .normalize.text import CASE_BLANK_PAGE
from .rewards import COMPONENTS, DEFAULT_FORMATTING_PENALTY, BoxMap, RewardConfig, parse_test_case, score_rollout
from .vocab import PRESET_TARGETS, BpeModel, count_frequencies, merge_counts, propagate_frequencies, prune
from .vocab.prune import verify_integrity, write_plan

log = logging.getLogger("ocrtoolkit")

FORMAT_VERSIONS = {"archive": "safetensors", "tokenizer": 1, "reports": 1}
EXIT_OK, EXIT_DATA, EXIT_CONFIG = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


# -- helpers -------------------------------------------------------------------

@contextmanager
def _output(path):
    if path is None or str(path) == "-":
        yield sys.stdout
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        yield fh


def _emit(obj, args):
    """Write a JSON report to ``--out`` (or stdout); ``--pretty`` adds a table on stderr."""
    with _output(getattr(args, "report_out", None)) as fh:
        fh.write(json.dumps(obj, sort_keys=True, ensure_ascii=False))
        fh.write("\n")


def _table(rows, headers, fh=None):
    fh = fh or sys.stdout
    cells = [[str(h) for h in headers]] + [[_fmt(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    for k, r in enumerate(cells):
        fh.write("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() + "\n")
        if k == 0:
            fh.write("  ".join("-" * w for w in widths) + "\n")


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4f}"
    return "-" if v is None else str(v)


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) in (None, []):
            raise ConfigError(f"missing required option --{name.replace('_', '-')}")


def _allowlist(args):
    return load_allowlist(args.allowlist) if getattr(args, "allowlist", None) else None


def _skip_summary(counter):
    return {"skipped_lines": counter.skipped} if counter.skipped else {}


# -- normalize -----------------------------------------------------------------

def _normalize_one(rec, config):
    doc = normalize_document(rec["text"], config, rec["doc_id"], rec.get("source", ""))
    return doc.record, doc.report


def cmd_normalize(args):
    _require(args, "input", "out")
    rate = check_fraction(args.empty_page_rate, "empty_page_rate")
    cfg = NormalizeConfig(
        watermark_patterns=tuple(args.watermark or ()),
        page_area_fraction=check_fraction(args.page_area_fraction, "page_area_fraction", include_low=False),
        loop_threshold=check_fraction(args.loop_threshold, "loop_threshold", include_low=False, include_high=False),
        min_loop_length=check_positive_int(args.min_loop_length, "min_loop_length", minimum=0),
        convert_budget_seconds=args.budget,
        allowlist=_allowlist(args),
    )
    cfg.patterns()  # surface pattern errors before reading data
    counter = SkipCounter()
    records = load_jsonl(args.input, CORPUS_SCHEMA, args.skip_bad, counter)
    results = ordered_map(partial(_normalize_one, config=cfg), records, args.workers)
    dedup = Deduplicator()
    dropped = {"duplicate": 0, "loop": 0, "empty_page": 0}
    total = 0

    def kept_records(report_fh):
        nonlocal total
        for record, report in results:
            total += 1
            reason = None
            if report["canonical_case"] == CASE_BLANK_PAGE:
                if not keep_empty_page(record.doc_id, rate, args.seed):
                    reason = "empty_page"
            elif report["flagged"] and not args.keep_loops:
                reason = "loop"
            elif not args.no_dedup:
                if next(iter(dedup.filter([record])), None) is None:
                    reason = "duplicate"
            if reason:
                dropped[reason] += 1
            if report_fh is not None:
                report_fh.write(json.dumps({**report, "kept": reason is None, "drop_reason": reason},
                                           sort_keys=True, ensure_ascii=False) + "\n")
            if reason is None:
                yield record.to_dict()

    report_cm = _output(args.report) if args.report else _null()
    with report_cm as rfh, _output(args.out) as ofh:
        kept = write_jsonl(kept_records(rfh), ofh)
    summary = {"documents": total, "kept": kept, "dropped": dropped, **_skip_summary(counter)}
    if args.pretty:
        _table([[total, kept, dropped["duplicate"], dropped["loop"], dropped["empty_page"]]],
               ["documents", "kept", "duplicates", "loops", "empty pages"], sys.stderr)
    _emit(summary, args)
    return EXIT_OK


@contextmanager
def _null():
    yield None


# -- rewards -------------------------------------------------------------------

def _score_one(item, config):
    doc_id, output, eos, tests, gt = item
    rb = score_rollout(output, eos, tests, gt, config)
    return {"doc_id": doc_id, **rb.to_dict()}


def _parse_weights(items):
    if isinstance(items, dict):
        return dict(items)
    weights = {}
    for item in items or ():
        if isinstance(item, dict):
            weights.update(item)
            continue
        name, sep, value = str(item).partition("=")
        if not sep:
            raise ConfigError(f"--weight expects component=value, got {item!r}")
        try:
            weights[name.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"--weight {name}: {value!r} is not a number") from None
    return weights


def _load_tests(path, skip_bad, counter):
    tests = {}
    if path is None:
        return tests
    for line, rec in load_jsonl(path, TESTS_SCHEMA, skip_bad, counter, numbered=True):
        try:
            parsed = [parse_test_case(t) for t in rec["tests"]]
        except DataError as exc:
            if skip_bad:
                counter.skipped += 1
                continue
            raise DataError(f"{path}: {exc}", line=line, field=exc.field) from None
        tests.setdefault(rec["doc_id"], []).extend(parsed)
    return tests


def cmd_score_rewards(args):
    _require(args, "input")
    cfg = RewardConfig(
        weights=_parse_weights(args.weight),
        loop_threshold=check_fraction(args.loop_threshold, "loop_threshold", include_low=False, include_high=False),
        min_loop_length=check_positive_int(args.min_loop_length, "min_loop_length", minimum=0),
        repetition_partial_ceiling=args.partial_ceiling,
        formatting_penalty=check_fraction(args.formatting_penalty, "formatting_penalty", high=float("inf")),
        allowlist=_allowlist(args),
    )
    check_weights(cfg.weights, COMPONENTS)
    counter = SkipCounter()
    tests = _load_tests(args.tests, args.skip_bad, counter)

    def items():
        for line, rec in load_jsonl(args.input, ROLLOUT_SCHEMA, args.skip_bad, counter, numbered=True):
            gt = rec.get("gt_boxes")
            try:
                gt = None if gt is None else BoxMap.from_json(gt)
            except (DataError, ValueError, TypeError, KeyError) as exc:
                if args.skip_bad:
                    counter.skipped += 1
                    continue
                raise DataError(f"{args.input}: bad gt_boxes: {exc}", line=line, field="gt_boxes") from None
            yield rec["doc_id"], rec["output"], rec["eos"], tuple(tests.get(rec["doc_id"], ())), gt

    n = 0
    sums = dict.fromkeys(("unit_test_score", "repetition_score", "math_score", "formatting_score",
                          "bbox_score", "aggregate"), 0.0)
    counts = dict.fromkeys(sums, 0)
    with _output(args.out) as fh:
        for rec in ordered_map(partial(_score_one, config=cfg), items(), args.workers):
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
            n += 1
            for k in sums:
                if rec[k] is not None:
                    sums[k] += rec[k]
                    counts[k] += 1
    means = {k: (sums[k] / counts[k] if counts[k] else None) for k in sums}
    if args.pretty:
        _table([[k, counts[k], means[k]] for k in sums], ["component", "scored", "mean"], sys.stderr)
    summary = {"rollouts": n, "mean": means, **_skip_summary(counter)}
    if args.out not in (None, "-"):
        _emit(summary, args)
    return EXIT_OK


# -- bbox-eval -----------------------------------------------------------------

def _read_boxes(path, skip_bad, counter):
    out = []
    for line, rec in load_jsonl(path, BOXES_SCHEMA, skip_bad, counter, numbered=True):
        try:
            out.append(PageBoxes.from_dict(rec, line))
        except DataError as exc:
            if not skip_bad:
                raise DataError(f"{path}: {exc}", field=exc.field) from None
            counter.skipped += 1
    return out


def cmd_bbox_eval(args):
    _require(args, "gt", "pred")
    threshold = check_fraction(args.iou_threshold, "iou_threshold", include_low=False)
    if args.matching not in MATCHING_METHODS:
        raise ConfigError(f"--matching must be one of {MATCHING_METHODS}")
    if args.mean_iou not in MEAN_IOU_MODES:
        raise ConfigError(f"--mean-iou must be one of {MEAN_IOU_MODES}")
    counter = SkipCounter()
    pairs = pair_pages(_read_boxes(args.gt, args.skip_bad, counter), _read_boxes(args.pred, args.skip_bad, counter))
    reports = evaluate_corpus(pairs, threshold, args.matching, args.mean_iou)
    out = {subset: rep.to_dict() for subset, rep in reports.items()}
    if args.pretty:
        _table([[s or "(all)", r.pages, r.f1_at_05, r.mean_iou, r.count_accuracy] for s, r in reports.items()],
               ["subset", "pages", "F1@0.5", "mean IoU", "count acc %"], sys.stderr)
    args.report_out = args.out
    _emit(out, args)
    return EXIT_OK


# -- detect-loops --------------------------------------------------------------

def _loop_one(text, threshold, min_length):
    return detect_loops(text, threshold, min_length)


def cmd_detect_loops(args):
    _require(args, "input")
    threshold = check_fraction(args.threshold, "threshold", include_low=False, include_high=False)
    min_length = check_positive_int(args.min_length, "min_length", minimum=0)
    counter = SkipCounter()
    ids, texts = [], []

    def stream():
        for i, rec in enumerate(load_jsonl(args.input, GENERATION_SCHEMA, args.skip_bad, counter)):
            text = rec.get("text", rec.get("output"))
            if text is None:
                raise DataError(f"{args.input}: record {i + 1} has neither 'text' nor 'output'", field="text")
            ids.append(rec.get("doc_id", str(i)))
            yield text

    n = eligible = flagged = 0
    fn = partial(_loop_one, threshold=threshold, min_length=min_length)
    with (_output(args.records) if args.records else _null()) as fh:
        for k, rep in enumerate(ordered_map(fn, stream(), args.workers)):
            n += 1
            eligible += rep.eligible
            flagged += rep.flagged
            if fh is not None:
                fh.write(json.dumps({"doc_id": ids[k], **rep.to_dict()}, sort_keys=True) + "\n")
    summary = {"documents": n, "eligible": eligible, "flagged": flagged,
               "percent_flagged": 100.0 * flagged / n if n else 0.0, "threshold": threshold,
               **_skip_summary(counter)}
    if args.pretty:
        _table([[n, eligible, flagged, summary["percent_flagged"]]],
               ["documents", "eligible", "flagged", "% loopy"], sys.stderr)
    args.report_out = args.out
    _emit(summary, args)
    return EXIT_OK


# -- merging -------------------------------------------------------------------

def _inputs(args, n=None):
    _require(args, "input", "out")
    paths = [Path(p) for p in args.input]
    if n is not None and len(paths) != n:
        raise ConfigError(f"expected exactly {n} --input archives, got {len(paths)}")
    for p in paths:
        if not p.is_file():
            raise ConfigError(f"input archive not found: {p}")
    return [load_archive(p) for p in paths]


def cmd_merge(args):
    base, other = _inputs(args, 2)
    if args.alpha is None:
        raise ConfigError("missing required option --alpha")
    merged = task_arithmetic(MergeSpec(base, other, _one_alpha(args.alpha)))
    save_archive(merged, args.out, workers=args.workers)
    _emit({"out": str(args.out), "alpha": merged.metadata["alpha"], "tensors": len(merged)}, args)
    return EXIT_OK


def _one_alpha(value):
    if isinstance(value, list):
        if len(value) != 1:
            raise ConfigError("merge takes a single --alpha")
        value = value[0]
    return value


def cmd_soup(args):
    archives = _inputs(args)
    weights = [float(w) for w in args.weight] if args.weight else None
    out = soup(archives, weights)
    save_archive(out, args.out, workers=args.workers)
    _emit({"out": str(args.out), "inputs": len(archives), "tensors": len(out)}, args)
    return EXIT_OK


def cmd_alpha_sweep(args):
    base, other = _inputs(args, 2)
    alphas = args.alpha if isinstance(args.alpha, list) else [args.alpha]
    alphas = [a for a in alphas if a is not None]
    if not alphas:
        raise ConfigError("alpha-sweep needs at least one --alpha")
    out_dir = Path(args.out)
    written = []
    for merged in alpha_sweep(base, other, alphas):
        path = out_dir / f"{merged.name}.safetensors"
        save_archive(merged, path, workers=args.workers)
        written.append(str(path))
    _emit({"outputs": written}, args)
    return EXIT_OK


# -- prune-vocab ---------------------------------------------------------------

def _count_chunk(chunk, model):
    return count_frequencies(chunk, model)


def _chunks(stream, size):
    buf = []
    for item in stream:
        buf.append(item)
        if len(buf) >= size:
            yield buf
            buf = []
    if buf:
        yield buf


def _target(value):
    if isinstance(value, str):
        if value.lower() in PRESET_TARGETS:
            return PRESET_TARGETS[value.lower()]
        try:
            value = int(value)
        except ValueError:
            raise ConfigError(f"--target must be an integer or one of {sorted(PRESET_TARGETS)}") from None
    return check_positive_int(value, "target")


def cmd_prune_vocab(args):
    _require(args, "tokenizer", "corpus", "target", "out")
    target = _target(args.target)
    if not Path(args.tokenizer).is_file():
        raise ConfigError(f"tokenizer file not found: {args.tokenizer}")
    model = BpeModel.load(args.tokenizer)
    counter = SkipCounter()

    def docs():
        for rec in load_jsonl(args.corpus, CORPUS_SCHEMA, args.skip_bad, counter):
            yield rec["doc_id"], rec["text"]

    tables = list(ordered_map(partial(_count_chunk, model=model), _chunks(docs(), 64), args.workers))
    direct = merge_counts(tables) if tables else count_frequencies([], model)
    plan = prune(model, propagate_frequencies(direct, model), target)
    out = write_plan(plan, args.out)
    summary = {"out": str(out), "old_size": len(model), "new_size": len(plan.model),
               "merges": len(plan.model.merges), **_skip_summary(counter)}
    if args.verify:
        corpus = ((rec["doc_id"], rec["text"]) for rec in load_jsonl(args.corpus, CORPUS_SCHEMA, args.skip_bad))
        rep = verify_integrity(model, plan, corpus)
        (out / "integrity.json").write_text(json.dumps(rep.to_dict(), sort_keys=True), encoding="utf-8")
        summary["integrity_ok"] = rep.ok
        summary["inflation"] = rep.inflation
        if not rep.ok:
            raise DataError(f"round-trip failures in {len(rep.failures)} document(s), e.g. {rep.failures[0]!r}")
    if args.pretty:
        _table([[len(model), len(plan.model), summary.get("inflation")]], ["old size", "new size", "inflation"],
               sys.stderr)
    _emit(summary, args)
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def _common(p, *, workers=True):
    p.add_argument("--skip-bad", action="store_true", help="skip malformed JSONL lines instead of failing")
    p.add_argument("--pretty", action="store_true", help="also print a human-readable table to stderr")
    if workers:
        p.add_argument("--workers", type=int, default=1, help="worker processes (default: %(default)s)")


def build_parser():
    parser = _Parser(prog="ocrtoolkit", description=__doc__.splitlines()[0],
                     formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument("--version", action="store_true", help="print toolkit and format versions")
    parser.add_argument("--config", help="JSON file whose keys mirror the long options; flags win")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("normalize", help="normalize, filter and deduplicate a JSONL corpus", formatter_class=fmt)
    p.add_argument("--in", dest="input", help="corpus JSONL {doc_id, source, text}")
    p.add_argument("--out", help="normalized corpus JSONL")
    p.add_argument("--report", help="per-document sidecar JSONL")
    p.add_argument("--summary", dest="report_out", help="summary JSON (default: stdout)")
    p.add_argument("--watermark", action="append", help="literal pattern, or re:REGEX; repeatable")
    p.add_argument("--page-area-fraction", type=float, default=0.95, help="full-page image cutoff")
    p.add_argument("--loop-threshold", type=float, default=DEFAULT_LOOP_THRESHOLD,
                   help="DEFLATE ratio below which a page is loopy")
    p.add_argument("--min-loop-length", type=int, default=MIN_LOOP_BYTES)
    p.add_argument("--keep-loops", action="store_true", help="keep loop-flagged documents")
    p.add_argument("--empty-page-rate", type=float, default=0.0, help="fraction of blank pages re-injected")
    p.add_argument("--seed", type=int, default=0, help="seed for the blank-page draw")
    p.add_argument("--no-dedup", action="store_true")
    p.add_argument("--budget", type=float, default=5.0, help="conversion budget in seconds per document")
    p.add_argument("--allowlist", help="extra math commands, one per line")
    _common(p)
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("score-rewards", help="score rollouts with the verifiable rewards", formatter_class=fmt)
    p.add_argument("--in", dest="input", help="rollouts JSONL {doc_id, output, eos[, gt_boxes]}")
    p.add_argument("--tests", help="unit-test JSONL {doc_id, tests}")
    p.add_argument("--out", help="reward records JSONL (default: stdout)")
    p.add_argument("--summary", dest="report_out", help="summary JSON when --out is a file (default: stdout)")
    p.add_argument("--weight", action="append", help="component=weight; repeatable")
    p.add_argument("--loop-threshold", type=float, default=DEFAULT_LOOP_THRESHOLD,
                   help="compression-ratio cutoff")
    p.add_argument("--min-loop-length", type=int, default=MIN_LOOP_BYTES)
    p.add_argument("--partial-ceiling", type=float, default=None,
                   help="enable graded repetition reward up to this ratio")
    p.add_argument("--formatting-penalty", type=float, default=DEFAULT_FORMATTING_PENALTY)
    p.add_argument("--allowlist", help="extra math commands, one per line")
    _common(p)
    p.set_defaults(func=cmd_score_rewards)

    p = sub.add_parser("bbox-eval", help="F1@IoU, mean IoU and count accuracy per subset", formatter_class=fmt)
    p.add_argument("--gt", help="ground-truth JSONL {doc_id, subset, boxes}")
    p.add_argument("--pred", help="prediction JSONL, same schema")
    p.add_argument("--out", help="report JSON (default: stdout)")
    p.add_argument("--iou-threshold", type=float, default=DEFAULT_IOU_THRESHOLD, help="minimum IoU for a true positive")
    p.add_argument("--matching", default="optimal", choices=MATCHING_METHODS)
    p.add_argument("--mean-iou", default="gt", choices=MEAN_IOU_MODES,
                   help="average over gt boxes (misses count 0) or over matched pairs")
    _common(p, workers=False)
    p.set_defaults(func=cmd_bbox_eval, workers=1)

    p = sub.add_parser("detect-loops", help="share of generations flagged as loops", formatter_class=fmt)
    p.add_argument("--in", dest="input", help="JSONL with a 'text' or 'output' field")
    p.add_argument("--out", help="summary JSON (default: stdout)")
    p.add_argument("--records", help="per-record JSONL")
    p.add_argument("--threshold", type=float, default=DEFAULT_LOOP_THRESHOLD, help="compression-ratio cutoff")
    p.add_argument("--min-length", type=int, default=MIN_LOOP_BYTES)
    _common(p)
    p.set_defaults(func=cmd_detect_loops)

    for name, func, helptext in (
        ("merge", cmd_merge, "task arithmetic: base + alpha * (other - base)"),
        ("soup", cmd_soup, "uniform (or weighted) checkpoint average"),
        ("alpha-sweep", cmd_alpha_sweep, "one task-arithmetic merge per alpha"),
    ):
        p = sub.add_parser(name, help=helptext, formatter_class=fmt)
        p.add_argument("--input", action="append", help="archive path; repeatable (base first)")
        if name == "soup":
            p.add_argument("--weight", action="append", type=float, help="per-input weight; repeatable")
        else:
            p.add_argument("--alpha", type=float, action="append" if name == "alpha-sweep" else None,
                           help="interpolation weight in [0, 1]")
        p.add_argument("--out", help="output directory" if name == "alpha-sweep" else "output archive")
        p.add_argument("--summary", dest="report_out", help="summary JSON (default: stdout)")
        _common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("prune-vocab", help="frequency-based BPE vocabulary pruning", formatter_class=fmt)
    p.add_argument("--tokenizer", help="tokenizer JSON {vocab, merges, special_tokens}")
    p.add_argument("--corpus", help="corpus JSONL {doc_id, text}")
    p.add_argument("--target", help="new vocabulary size, or 51k/32k/16k")
    p.add_argument("--out", help="output directory")
    p.add_argument("--verify", action="store_true", help="round-trip the corpus and report inflation")
    p.add_argument("--summary", dest="report_out", help="summary JSON (default: stdout)")
    _common(p)
    p.set_defaults(func=cmd_prune_vocab)
    return parser


def _subparser(parser, command):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices.get(command)
    return None


def _apply_config(parser, argv):
    pre, _ = parser.parse_known_args(argv)
    if not pre.config:
        return
    try:
        cfg = json.loads(Path(pre.config).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {pre.config}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {pre.config}: invalid JSON: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    sp = _subparser(parser, pre.command)
    if sp is None:
        return
    commands = set(next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices)
    # top-level keys apply to any subcommand; a section named after it wins
    section = cfg.get(pre.command) or {}
    if not isinstance(section, dict):
        raise ConfigError(f"config section {pre.command!r} must be an object")
    merged = {k: v for k, v in cfg.items() if k not in commands}
    merged.update(section)
    known = {a.dest for a in sp._actions} - {"help", "func"}
    defaults = {}
    for key, value in merged.items():
        dest = "input" if key == "in" else key.replace("-", "_")
        if dest not in known:
            raise ConfigError(f"config key {key!r} is not an option of {pre.command!r}")
        defaults[dest] = value
    sp.set_defaults(**defaults)


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.version:
        print(f"ocrtoolkit {__version__} (formats: " +
              ", ".join(f"{k} {v}" for k, v in FORMAT_VERSIONS.items()) + ")")
        return EXIT_OK
    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    try:
        if getattr(args, "workers", 1) is not None:
            args.workers = check_positive_int(args.workers, "workers")
        return args.func(args)
    except (ConfigError, InfeasibleTargetError, NoRewardSignal) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, MergeError, TokenizationError) as exc:
        where = f" (field {exc.field!r})" if getattr(exc, "field", None) else ""
        print(f"data error: {exc}{where}", file=sys.stderr)
        return EXIT_DATA
    except OcrToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
