"""Answer-string metrics: normalization, exact match, and token-level F1.

Normalization order matters and is fixed: lowercase, drop article tokens
(a/an/the), turn ASCII punctuation into spaces, collapse whitespace. So
"The Eiffel Tower." normalizes to "eiffel tower" and "A&B" to "a b" (the
leading "a" survives because "a&b" is a single token when articles are
removed).
"""

from __future__ import annotations

import string
from collections import Counter
from typing import Sequence

_ARTICLES = frozenset({"a", "an", "the"})
_PUNCT_TO_SPACE = str.maketrans({ch: " " for ch in string.punctuation})


def normalize_answer(text: str) -> str:
    text = text.lower()
    text = " ".join(tok for tok in text.split() if tok not in _ARTICLES)
    text = text.translate(_PUNCT_TO_SPACE)
    return " ".join(text.split())


def exact_match(prediction: str, golds: Sequence[str]) -> float:
    """1.0 if the normalized prediction equals any normalized gold."""
    pred = normalize_answer(prediction)
    return float(any(pred == normalize_answer(gold) for gold in golds))


def f1(prediction: str, golds: Sequence[str]) -> float:
    """Best token-bag F1 over the gold aliases."""
    return max((_f1_single(prediction, gold) for gold in golds), default=0.0)


def _f1_single(prediction: str, gold: str) -> float:
    pred_tokens = normalize_answer(prediction).split()
    gold_tokens = normalize_answer(gold).split()
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    common = Counter(pred_tokens) & Counter(gold_tokens)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)
