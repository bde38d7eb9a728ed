"""scikit-learn compatible wrappers around the normalization functions."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_fraction, check_positive_int
from .loops import DEFAULT_LOOP_THRESHOLD, MIN_LOOP_BYTES, detect_loops
from .pipeline import NormalizeConfig, normalize_document
from .text import compile_watermark_patterns


def check_texts(X):
    """Coerce ``X`` to a list of ``str`` (list, tuple, 1-d array or Series)."""
    if isinstance(X, str):
        raise TypeError("expected a sequence of strings, got a single string")
    if isinstance(X, np.ndarray) and X.ndim != 1:
        raise ValueError(f"expected a 1-d array of strings, got shape {X.shape}")
    texts = list(X)
    for i, t in enumerate(texts):
        if not isinstance(t, str):
            raise TypeError(f"element {i} is {type(t).__name__}, expected str")
    return texts


class TextNormalizer(TransformerMixin, BaseEstimator):
    """Stateless transformer mapping raw transcriptions to the canonical format.

    Parameters
    ----------
    watermark_patterns : sequence of str
        Literal strings, or regexes prefixed with ``re:``.
    page_area_fraction : float
        Minimum box coverage for a lone image to count as a full-page image.
    loop_threshold : float
        DEFLATE ratio below which a text is reported as looping.
    """

    def __init__(self, watermark_patterns=(), page_area_fraction=0.95,
                 loop_threshold=DEFAULT_LOOP_THRESHOLD):
        self.watermark_patterns = watermark_patterns
        self.page_area_fraction = page_area_fraction
        self.loop_threshold = loop_threshold

    def fit(self, X=None, y=None):
        check_fraction(self.page_area_fraction, "page_area_fraction", include_low=False)
        check_fraction(self.loop_threshold, "loop_threshold", include_low=False, include_high=False)
        self.patterns_ = compile_watermark_patterns(tuple(self.watermark_patterns))
        self.config_ = NormalizeConfig(
            watermark_patterns=tuple(self.watermark_patterns),
            page_area_fraction=self.page_area_fraction,
            loop_threshold=self.loop_threshold,
            _compiled=self.patterns_,
        )
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        return [normalize_document(t, self.config_).text for t in check_texts(X)]

    def transform_with_reports(self, X):
        check_is_fitted(self, "config_")
        docs = [normalize_document(t, self.config_) for t in check_texts(X)]
        return [d.text for d in docs], [d.report for d in docs]


class LoopDetector(BaseEstimator):
    """Binary detector for repetition loops; ``predict`` returns True when flagged."""

    def __init__(self, threshold=DEFAULT_LOOP_THRESHOLD, min_length=MIN_LOOP_BYTES):
        self.threshold = threshold
        self.min_length = min_length

    def fit(self, X=None, y=None):
        check_fraction(self.threshold, "threshold", include_low=False, include_high=False)
        check_positive_int(self.min_length, "min_length", minimum=0)
        self.fitted_ = True
        return self

    def score_samples(self, X):
        """DEFLATE compression ratios; lower means more repetitive."""
        check_is_fitted(self, "fitted_")
        return np.array([detect_loops(t, self.threshold, self.min_length).compression_ratio
                         for t in check_texts(X)])

    def predict(self, X):
        check_is_fitted(self, "fitted_")
        return np.array([detect_loops(t, self.threshold, self.min_length).flagged
                         for t in check_texts(X)], dtype=bool)
