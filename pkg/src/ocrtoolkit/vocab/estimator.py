"""scikit-learn wrapper around frequency counting and pruning."""
from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .bpe import BpeModel
from .prune import count_frequencies, propagate_frequencies, prune


class VocabPruner(TransformerMixin, BaseEstimator):
    """Fit on a document collection; transform encodes with the pruned model.

    Parameters
    ----------
    tokenizer : BpeModel or path to a tokenizer JSON file
    target_size : int
        Vocabulary size after pruning.
    """

    def __init__(self, tokenizer=None, target_size=16384):
        self.tokenizer = tokenizer
        self.target_size = target_size

    def _model(self):
        if isinstance(self.tokenizer, BpeModel):
            return self.tokenizer
        if self.tokenizer is None:
            raise ValueError("tokenizer is required")
        return BpeModel.load(self.tokenizer)

    def fit(self, X, y=None):
        model = self._model()
        self.direct_counts_ = count_frequencies(X, model)
        self.frequencies_ = propagate_frequencies(self.direct_counts_, model)
        self.plan_ = prune(model, self.frequencies_, self.target_size)
        self.n_features_out_ = len(self.plan_.model)
        return self

    def transform(self, X):
        check_is_fitted(self, "plan_")
        enc = self.plan_.model.encode
        return [enc(x) for x in X]

    def inverse_transform(self, X):
        check_is_fitted(self, "plan_")
        dec = self.plan_.model.decode
        return [dec(ids) for ids in X]
