"""Model-free tooling for OCR training and evaluation.

Submodules: :mod:`markup` (canonical output format), :mod:`normalize`,
:mod:`rewards`, :mod:`bbox_eval`, :mod:`merge` and :mod:`vocab`.
"""
__version__ = "0.1.0"

from .bbox_eval import evaluate_corpus, iou, match_boxes
from .exceptions import (ConfigError, DataError, InfeasibleTargetError, MergeError, NoRewardSignal, OcrToolkitError,
                         PairingError, TokenizationError)
from .markup import BBox, ImageRef, PageOutput, parse_page, serialize_page
from .rewards import RewardBreakdown, aggregate_reward, bbox_reward, score_rollout

__all__ = [
    "__version__", "BBox", "ConfigError", "DataError", "ImageRef", "InfeasibleTargetError", "MergeError",
    "NoRewardSignal", "OcrToolkitError", "PageOutput", "PairingError", "RewardBreakdown", "TokenizationError",
    "aggregate_reward", "bbox_reward", "evaluate_corpus", "iou", "match_boxes", "parse_page", "score_rollout",
    "serialize_page",
]
