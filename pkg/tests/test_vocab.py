import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone
from tokenizers import Tokenizer, decoders, models, pre_tokenizers

from corpora import cjk_corpus, en_fr_corpus
from ocrtoolkit.exceptions import DataError, InfeasibleTargetError, TokenizationError
from ocrtoolkit.vocab import (PRESET_TARGETS, BpeModel, PrunePlan, VocabPruner, bytes_to_unicode,
                              count_frequencies, dominant_script, emit_embedding_plan, merge_counts,
                              propagate_frequencies, prune, train_bpe, verify_integrity, write_plan)

SPECIALS = ["<|endoftext|>", "<|pad|>"]
B2U = bytes_to_unicode()


@pytest.fixture(scope="module")
def corpus():
    return en_fr_corpus(120, 60, seed=3) + cjk_corpus(40, 80, seed=4)


@pytest.fixture(scope="module")
def model(corpus):
    return train_bpe(corpus, 1500, SPECIALS)


@pytest.fixture(scope="module")
def pruned(model, corpus):
    freq = propagate_frequencies(count_frequencies(corpus, model), model)
    return freq, prune(model, freq, 700)


def hf_tokenizer(m: BpeModel):
    tok = Tokenizer(models.BPE(vocab=dict(m.vocab), merges=list(m.merges)))
    tok.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False, use_regex=True)
    tok.decoder = decoders.ByteLevel()
    tok.add_special_tokens([m.id_to_token[i] for i in sorted(m.specials)])
    return tok


def tiny_model():
    """Byte alphabet plus "ab" and "abc"."""
    vocab = {B2U[b]: b for b in range(256)}
    vocab["ab"] = 256
    vocab["abc"] = 257
    return BpeModel(vocab, [("a", "b"), ("ab", "c")])


text_strategy = st.text(st.characters(blacklist_categories=("Cs",)), max_size=60)


class TestBpeModel:
    def test_train_layout(self, model):
        assert [model.id_to_token[i] for i in (0, 1)] == SPECIALS
        assert model.id_to_token[2] == B2U[0] and len(model) == 1500

    @pytest.mark.parametrize("text", ["Hello world", "l'été", "中文，测试。", "  spaces\n\nand\ttabs ", "x<|pad|>y",
                                      "emoji 😀 ok", "1234 5678"])
    def test_matches_reference_implementation(self, model, text):
        assert model.encode(text) == hf_tokenizer(model).encode(text).ids

    @given(text_strategy)
    def test_fuzz_matches_reference(self, model, text):
        assert model.encode(text) == hf_tokenizer(model).encode(text).ids

    @given(text_strategy)
    def test_round_trip(self, model, text):
        assert model.decode(model.encode(text)) == text

    def test_bad_text(self, model):
        with pytest.raises(TokenizationError) as exc:
            model.encode("\ud800", doc_id="d1")
        assert exc.value.doc_id == "d1"

    def test_save_load(self, model, tmp_path):
        model.save(tmp_path / "t.json")
        data = json.loads((tmp_path / "t.json").read_text())
        assert set(data) == {"vocab", "merges", "special_tokens"}
        assert data["merges"][0] == " ".join(model.merges[0])
        back = BpeModel.load(tmp_path / "t.json")
        assert back.vocab == model.vocab and back.merges == model.merges and back.specials == model.specials

    def test_hf_layout(self, model, tmp_path):
        path = tmp_path / "hf.json"
        hf_tokenizer(model).save(str(path))
        back = BpeModel.load(path)
        assert back.vocab == model.vocab and back.merges == model.merges
        assert back.encode("Hello world") == model.encode("Hello world")

    def test_pre_tokenizer_copied(self, tmp_path):
        m = tiny_model()
        d = m.to_dict()
        d["pre_tokenizer"] = {"type": "Split", "pattern": {"Regex": r"\s+|\S+"}, "extra": [1]}
        m2 = BpeModel.from_dict(d)
        assert m2.to_dict()["pre_tokenizer"] == d["pre_tokenizer"]

    @pytest.mark.parametrize("mutate", [
        lambda d: d["vocab"].pop("abc"),
        lambda d: d["vocab"].update({"zz": 258}),
        lambda d: d["merges"].append("a b"),
        lambda d: d["merges"].insert(0, "ab c"),
        lambda d: d["vocab"].update({"ab": 999}),
        lambda d: d.update({"special_tokens": ["nope"]}),
        lambda d: d.update({"merges": ["a b c"]}),
    ])
    def test_invalid_models(self, mutate):
        d = tiny_model().to_dict()
        mutate(d)
        with pytest.raises(DataError):
            BpeModel.from_dict(d)


class TestFrequencies:
    def test_empty(self, model):
        assert not count_frequencies([], model).any()

    def test_single_token(self):
        m = tiny_model()
        counts = count_frequencies(["abc"], m)
        assert counts[257] == 1 and counts.sum() == 1

    def test_additive(self, model, corpus):
        whole = count_frequencies(corpus, model)
        parts = merge_counts([count_frequencies(corpus[:50], model), count_frequencies(corpus[50:], model)])
        assert (whole == parts).all()

    def test_propagation_example(self):
        vocab = {B2U[b]: b for b in range(256)}
        vocab.update({"th": 256, "the": 257})
        m = BpeModel(vocab, [("t", "h"), ("th", "e")])
        direct = np.zeros(len(m), np.int64)
        direct[257] = 10
        prop = propagate_frequencies(direct, m)
        assert prop[256] >= 10 and prop[vocab["e"]] >= 10
        assert prop[vocab["t"]] == prop[vocab["h"]] == 10
        assert prop[vocab["z"]] == 0

    def test_propagation_dominates(self, model, corpus):
        direct = count_frequencies(corpus, model)
        prop = propagate_frequencies(direct, model)
        assert (prop >= direct).all() and prop.sum() >= direct.sum()
        parts = model.constituents()
        for tok, (left, right) in parts.items():
            assert prop[left] >= prop[tok] and prop[right] >= prop[tok]

    def test_propagation_recursive_oracle(self, model, corpus):
        # independent definition: a token's mass is its own count plus that of every token that uses it
        direct = count_frequencies(corpus[:30], model)
        parents = {}
        for tok, (left, right) in model.constituents().items():
            parents.setdefault(left, []).append(tok)
            parents.setdefault(right, []).append(tok)
        memo = {}

        def mass(t):
            if t not in memo:
                memo[t] = int(direct[t]) + sum(mass(p) for p in parents.get(t, ()))
            return memo[t]

        prop = propagate_frequencies(direct, model)
        # a token used as both halves of one merge is counted twice by the oracle, as by propagation
        assert all(prop[t] == mass(t) for t in range(len(model)))

    def test_propagation_input_checks(self, model):
        with pytest.raises(ValueError):
            propagate_frequencies(np.zeros(3), model)
        with pytest.raises(ValueError):
            propagate_frequencies(-np.ones(len(model)), model)


class TestPrune:
    def test_identity(self, model, corpus):
        freq = propagate_frequencies(count_frequencies(corpus, model), model)
        plan = prune(model, freq, len(model))
        assert plan.keep_old_ids == list(range(len(model)))
        assert emit_embedding_plan(plan) == list(range(len(model)))
        rep = verify_integrity(model, plan, corpus)
        assert rep.ok and rep.inflation == 1.0

    def test_closure_forces_constituent(self):
        m = tiny_model()
        freq = np.zeros(len(m), np.int64)
        freq[257] = 5  # "abc" popular, "ab" never seen on its own
        plan = prune(m, freq, 258)
        assert {"ab", "abc"} <= set(plan.model.vocab)
        assert set(prune(m, freq, 257).model.vocab) == set(B2U.values())

    def test_infeasible(self, model):
        with pytest.raises(InfeasibleTargetError) as exc:
            prune(model, np.zeros(len(model), np.int64), 100)
        assert exc.value.minimal_size == 258

    def test_embedding_rows(self, tmp_path):
        plan = PrunePlan([0, 5, 9], {0: 0, 5: 1, 9: 2}, None)
        assert emit_embedding_plan(plan, tmp_path / "rows.txt") == [0, 5, 9]
        assert (tmp_path / "rows.txt").read_text() == "0\n5\n9\n"

    def test_plan_invariants(self, model, pruned):
        _, plan = pruned
        new = plan.model
        assert len(new) <= 700
        assert set(model.specials) <= set(plan.keep_old_ids)
        assert set(model.base_ids) <= set(plan.keep_old_ids)
        assert plan.keep_old_ids == sorted(plan.keep_old_ids)
        assert [plan.remap[o] for o in plan.keep_old_ids] == list(range(len(new)))
        for a, b in new.merges:
            assert a in new.vocab and b in new.vocab and a + b in new.vocab
        order = [model.ranks[m] for m in new.merges]
        assert order == sorted(order)
        for old, nid in plan.remap.items():
            assert new.id_to_token[nid] == model.id_to_token[old]

    def test_keeps_most_frequent(self, model, pruned):
        freq, plan = pruned
        kept = set(plan.keep_old_ids)
        optional = [i for i in range(len(model)) if i not in model.specials and i not in model.base_ids]
        dropped = [i for i in optional if i not in kept]
        kept_opt = [i for i in optional if i in kept]
        assert min((freq[i], -i) for i in kept_opt) > max((freq[i], -i) for i in dropped)

    @given(text_strategy)
    def test_round_trip_after_prune(self, pruned, text):
        _, plan = pruned
        assert plan.model.decode(plan.model.encode(text)) == text

    @given(st.lists(st.integers(0, 5), min_size=1, max_size=4))
    def test_equivalence_on_covered_text(self, model, corpus, pruned, idx):
        _, plan = pruned
        kept = set(plan.keep_old_ids)
        for i in idx:
            for text in corpus[i * 7: i * 7 + 3]:
                for word in text.split(" ")[:40]:
                    piece = " " + word
                    old = model.encode(piece)
                    if set(old) <= kept:
                        assert [plan.remap[t] for t in old] == plan.model.encode(piece)

    @given(st.integers(258, 1500), st.integers(258, 1500))
    def test_monotone_containment(self, model, pruned, t1, t2):
        freq, _ = pruned
        lo, hi = sorted((t1, t2))
        assert set(prune(model, freq, lo).keep_old_ids) <= set(prune(model, freq, hi).keep_old_ids)

    def test_inflation(self, model, corpus, pruned):
        _, plan = pruned
        rep = verify_integrity(model, plan, corpus)
        assert rep.ok and rep.inflation > 1.0
        assert set(rep.per_script) == {"LATIN", "CJK"}
        assert rep.per_script["CJK"].inflation > 1.0

    def test_round_trip_failure_reported(self, model, corpus, pruned):
        _, plan = pruned

        class Broken(BpeModel):
            def decode(self, ids):
                return "x"

        bad = PrunePlan(plan.keep_old_ids, plan.remap,
                        Broken(plan.model.vocab, plan.model.merges, plan.model.specials))
        rep = verify_integrity(model, bad, [{"doc_id": "p1", "text": "hello"}])
        assert rep.failures == ["p1"] and not rep.ok

    def test_write_plan(self, pruned, tmp_path):
        _, plan = pruned
        write_plan(plan, tmp_path)
        assert BpeModel.load(tmp_path / "tokenizer.json").vocab == plan.model.vocab
        saved = json.loads((tmp_path / "prune_plan.json").read_text())
        assert saved["keep_old_ids"] == plan.keep_old_ids
        assert len((tmp_path / "embedding_rows.txt").read_text().split()) == len(plan.keep_old_ids)

    def test_presets(self):
        assert PRESET_TARGETS == {"51k": 51200, "32k": 32768, "16k": 16384}


class TestScripts:
    @pytest.mark.parametrize("text,script", [("hello", "LATIN"), ("中文abc中文", "CJK"), ("123 !", "COMMON"),
                                             ("привет", "CYRILLIC")])
    def test_dominant(self, text, script):
        assert dominant_script(text) == script


class TestVocabPruner:
    def test_fit_transform(self, model, corpus):
        est = VocabPruner(model, target_size=600)
        ids = est.fit_transform(corpus[:20])
        assert est.n_features_out_ <= 600
        assert est.inverse_transform(ids) == corpus[:20]
        assert clone(est).get_params()["target_size"] == 600

    def test_from_path(self, model, corpus, tmp_path):
        model.save(tmp_path / "t.json")
        est = VocabPruner(str(tmp_path / "t.json"), 600).fit(corpus[:10])
        assert len(est.plan_.model) <= 600

    def test_requires_tokenizer(self):
        with pytest.raises(ValueError):
            VocabPruner().fit(["x"])
