import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import cell_iou, max_matching_size
from ocrtoolkit.bbox_eval import (PageBoxes, evaluate_corpus, evaluate_page, iou, iou_matrix, match_boxes,
                                  pair_pages)
from ocrtoolkit.exceptions import DataError, PairingError
from ocrtoolkit.markup import BBox

A = BBox(0, 0, 100, 100)
B = BBox(500, 500, 600, 600)

small_box = st.tuples(*[st.integers(0, 10)] * 4).map(
    lambda t: BBox(min(t[0], t[2]), min(t[1], t[3]), max(t[0], t[2]), max(t[1], t[3])))
box_list = st.lists(small_box, max_size=3)


def pb(boxes, doc="d", subset="s"):
    return PageBoxes(doc, subset, tuple(boxes))


class TestIou:
    def test_examples(self):
        assert iou(A, A) == 1.0
        assert iou(A, B) == 0.0
        assert iou(BBox(0, 0, 10, 10), BBox(5, 0, 15, 10)) == pytest.approx(1 / 3, abs=1e-15)

    def test_degenerate(self):
        assert iou(BBox(5, 5, 5, 5), BBox(5, 5, 5, 5)) == 0.0
        assert iou(None, A) == 0.0

    @given(small_box, small_box)
    def test_matches_raster(self, a, b):
        assert iou(a, b) == pytest.approx(cell_iou(a.as_tuple(), b.as_tuple(), 1, 10), abs=1e-12)

    @given(small_box, small_box)
    def test_symmetric_bounded(self, a, b):
        assert iou(a, b) == iou(b, a) and 0.0 <= iou(a, b) <= 1.0


class TestMatch:
    def test_identical(self):
        assert match_boxes([A, B], [A, B]) == [(0, 0, 1.0), (1, 1, 1.0)]

    def test_two_gt_one_pred(self):
        assert match_boxes([A, B], [A]) == [(0, 0, 1.0)]

    @pytest.mark.parametrize("method", ["optimal", "greedy"])
    def test_one_pred_two_gt(self, method):
        gt = [BBox(0, 0, 100, 100), BBox(0, 0, 100, 80)]
        out = match_boxes(gt, [BBox(0, 0, 100, 95)], method=method)
        assert [(g, p) for g, p, _ in out] == [(0, 0)]

    def test_threshold(self):
        half = BBox(0, 0, 100, 50)
        assert match_boxes([A], [half], 0.5) == [(0, 0, 0.5)]
        assert match_boxes([A], [half], 0.51) == []

    def test_greedy_vs_optimal_counterexample(self):
        gt = [BBox(0, 0, 1000, 1000), BBox(0, 0, 1000, 500)]
        pred = [BBox(0, 0, 1000, 750), BBox(250, 250, 1000, 1000)]
        assert len(match_boxes(gt, pred, method="greedy")) == 1
        assert len(match_boxes(gt, pred, method="optimal")) == 2

    def test_bad_args(self):
        with pytest.raises(ValueError):
            match_boxes([A], [A], 0.0)
        with pytest.raises(ValueError):
            match_boxes([A], [A], method="hungarian-ish")

    @given(box_list, box_list)
    def test_optimal_is_maximum(self, gt, pred):
        want = max_matching_size(iou_matrix(gt, pred), 0.5)
        assert len(match_boxes(gt, pred)) == want

    @given(box_list, box_list, st.sampled_from(["optimal", "greedy"]))
    def test_one_to_one(self, gt, pred, method):
        out = match_boxes(gt, pred, method=method)
        assert len({g for g, _, _ in out}) == len(out) == len({p for _, p, _ in out})
        assert all(v >= 0.5 for _, _, v in out)

    @given(box_list, box_list, st.randoms())
    def test_permutation_invariance(self, gt, pred, rnd):
        ev = evaluate_page(pb(gt), pb(pred))
        rnd.shuffle(gt)
        rnd.shuffle(pred)
        ev2 = evaluate_page(pb(gt), pb(pred))
        assert (ev.tp, ev.fp, ev.fn, ev.count_exact) == (ev2.tp, ev2.fp, ev2.fn, ev2.count_exact)
        assert ev.matched_ious == pytest.approx(ev2.matched_ious)


class TestEvaluate:
    def test_page_examples(self):
        ev = evaluate_page(pb([A, B]), pb([A, B]))
        assert (ev.tp, ev.fp, ev.fn, ev.count_exact) == (2, 0, 0, True)
        ev = evaluate_page(pb([A, B]), pb([]))
        assert (ev.tp, ev.fn, ev.count_exact) == (0, 2, False)
        ev = evaluate_page(pb([A, B]), pb([A]))
        assert (ev.tp, ev.fp, ev.fn) == (1, 0, 1)

    def test_doc_mismatch(self):
        with pytest.raises(PairingError):
            evaluate_page(pb([A], "x"), pb([A], "y"))

    def test_corpus_example(self):
        rep = evaluate_corpus([(pb([A, B]), pb([A]))])["s"]
        assert rep.f1_at_05 == pytest.approx(2 / 3)
        assert rep.mean_iou == 0.5 and rep.count_accuracy == 0.0

    def test_matched_mode(self):
        rep = evaluate_corpus([(pb([A, B]), pb([A]))], mean_iou_mode="matched")["s"]
        assert rep.mean_iou == 1.0

    def test_missing_prediction_counts_as_misses(self):
        rep = evaluate_corpus([(pb([A]), None)])["s"]
        assert rep.f1_at_05 == 0.0 and rep.count_accuracy == 0.0

    def test_subsets_separate(self):
        pairs = [(pb([A], "1", "olmocr"), pb([A], "1")), (pb([A], "2", "arxiv"), pb([], "2"))]
        out = evaluate_corpus(pairs)
        assert list(out) == ["arxiv", "olmocr"]
        assert out["olmocr"].f1_at_05 == 1.0 and out["arxiv"].f1_at_05 == 0.0

    @given(st.lists(st.lists(small_box.filter(lambda b: not b.is_degenerate), max_size=4), min_size=1, max_size=8))
    def test_self_evaluation(self, pages):
        pairs = [(pb(b, str(i)), pb(b, str(i))) for i, b in enumerate(pages)]
        rep = evaluate_corpus(pairs)["s"]
        assert (rep.f1_at_05, rep.mean_iou, rep.count_accuracy) == (1.0, 1.0, 100.0)

    @given(box_list, box_list)
    def test_adding_matching_pred_never_lowers_f1(self, gt, pred):
        if not gt:
            return
        before = evaluate_corpus([(pb(gt), pb(pred))])["s"]
        matched = {g for g, _, _ in match_boxes(gt, pred)}
        free = [g for i, g in enumerate(gt) if i not in matched and not g.is_degenerate]
        if not free:
            return
        after = evaluate_corpus([(pb(gt), pb(pred + [free[0]]))])["s"]
        assert after.f1_at_05 >= before.f1_at_05


class TestPairing:
    def test_pairs_and_missing(self):
        g = [pb([A], "1"), pb([B], "2")]
        p = [pb([A], "1")]
        pairs = pair_pages(g, p)
        assert [(a.doc_id, b and b.doc_id) for a, b in pairs] == [("1", "1"), ("2", None)]

    def test_orphans(self):
        with pytest.raises(PairingError) as exc:
            pair_pages([pb([A], "1")], [pb([A], "1"), pb([A], "9"), pb([], "7")])
        assert exc.value.orphans == ["7", "9"]

    def test_duplicates(self):
        with pytest.raises(DataError):
            pair_pages([pb([A], "1"), pb([A], "1")], [])

    def test_from_dict(self):
        p = PageBoxes.from_dict({"doc_id": "a", "subset": "arxiv", "boxes": [[0, 0, 10, 10]]})
        assert p.boxes == (BBox(0, 0, 10, 10),)
        with pytest.raises(DataError) as exc:
            PageBoxes.from_dict({"doc_id": "a", "boxes": [[0, 0, 2000, 10]]}, line=4)
        assert exc.value.line == 4
