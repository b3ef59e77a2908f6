"""Lexical overlap metrics and the dense per-(sample, system, metric) table.

Tokenization is lowercase + split on Unicode whitespace with punctuation kept
attached; deterministic and dependency-free. Neural metric scores (BERT-SCORE,
MOVER-SCORE, ...) are never computed here, they arrive as external score files.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset, Sample

INTERNAL_METRICS = ("rouge_1", "rouge_2", "rouge_l", "bleu")
DEFAULT_EXTERNAL_METRICS = ("bert_score", "mover_score", "bart_score", "meteor")


class MetricError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    return text.lower().split()


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _dice(count_a: Counter, total_a: int, count_b: Counter, total_b: int) -> float:
    overlap = sum((count_a & count_b).values())
    return 2.0 * overlap / (total_a + total_b)


def bigram_dice(a: str, b: str) -> float:
    """Dice coefficient over word-bigram multisets; symmetric, in [0, 1].

    Texts too short to form bigrams score 1.0 only when both are
    token-identical, otherwise 0.0.
    """
    ta, tb = tokenize(a), tokenize(b)
    ca, cb = _ngram_counts(ta, 2), _ngram_counts(tb, 2)
    if not ca or not cb:
        return 1.0 if len(ta) < 2 and len(tb) < 2 and ta == tb else 0.0
    return _dice(ca, sum(ca.values()), cb, sum(cb.values()))


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def rouge_n(candidate: str, references: Sequence[str], n: int) -> float:
    """Clipped n-gram F1 against the best-matching reference (n in {1, 2})."""
    if n not in (1, 2):
        raise MetricError(f"rouge_n supports n in {{1, 2}}, got {n}")
    cand = _ngram_counts(tokenize(candidate), n)
    if not references or not cand:
        return 0.0
    cand_total = sum(cand.values())
    best = 0.0
    for ref in references:
        ref_counts = _ngram_counts(tokenize(ref), n)
        if not ref_counts:
            continue
        overlap = sum((cand & ref_counts).values())
        best = max(best, _f1(overlap / cand_total, overlap / sum(ref_counts.values())))
    return best


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    # two-row DP keeps memory linear in the shorter text
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        curr = [0]
        for j, y in enumerate(b, 1):
            curr.append(prev[j - 1] + 1 if x == y else max(prev[j], curr[j - 1]))
        prev = curr
    return prev[-1]


def rouge_l(candidate: str, references: Sequence[str]) -> float:
    """LCS-based F1 (beta = 1) against the best-matching reference."""
    cand = tokenize(candidate)
    if not references or not cand:
        return 0.0
    best = 0.0
    for ref in references:
        ref_tokens = tokenize(ref)
        if not ref_tokens:
            continue
        lcs = _lcs_length(cand, ref_tokens)
        best = max(best, _f1(lcs / len(cand), lcs / len(ref_tokens)))
    return best


def bleu(candidate: str, references: Sequence[str], max_n: int = 4) -> float:
    """Sentence BLEU with uniform 1..max_n weights and a brevity penalty.

    Zero counts at orders n >= 2 get add-one smoothing (unsmoothed
    sentence-level BLEU is 0 too often to be a usable feature); a zero
    unigram overlap keeps the score at exactly 0.
    """
    if max_n < 1:
        raise MetricError(f"max_n must be >= 1, got {max_n}")
    cand = tokenize(candidate)
    refs = [tokenize(r) for r in references if tokenize(r)]
    if not cand or not refs:
        return 0.0

    log_sum = 0.0
    for n in range(1, max_n + 1):
        counts = _ngram_counts(cand, n)
        total = sum(counts.values())
        ref_counts = [_ngram_counts(r, n) for r in refs]
        clipped = sum(
            min(c, max(rc[gram] for rc in ref_counts)) for gram, c in counts.items()
        )
        if clipped == 0:
            if n == 1:
                return 0.0
            clipped, total = 1, total + 1
        log_sum += math.log(clipped / max(total, 1)) / max_n

    cand_len = len(cand)
    ref_len = min((abs(len(r) - cand_len), len(r)) for r in refs)[1]
    brevity = 1.0 if cand_len >= ref_len else math.exp(1.0 - ref_len / cand_len)
    return brevity * math.exp(log_sum)


@dataclass(frozen=True)
class MetricSpec:
    name: str
    kind: str  # "internal" | "external"

    def __post_init__(self) -> None:
        if self.kind not in ("internal", "external"):
            raise MetricError(f"metric kind must be internal|external, got {self.kind!r}")
        if self.kind == "internal" and self.name not in INTERNAL_METRICS:
            raise MetricError(
                f"unknown internal metric {self.name!r}; choose from {INTERNAL_METRICS}"
            )

    @classmethod
    def parse(cls, name: str) -> "MetricSpec":
        """Infer the kind from the fixed internal-metric name set."""
        return cls(name, "internal" if name in INTERNAL_METRICS else "external")


DEFAULT_METRIC_SET = tuple(MetricSpec(m, "internal") for m in INTERNAL_METRICS)

_INTERNAL_FNS = {
    "rouge_1": lambda out, refs: rouge_n(out, refs, 1),
    "rouge_2": lambda out, refs: rouge_n(out, refs, 2),
    "rouge_l": rouge_l,
    "bleu": bleu,
}


@dataclass(frozen=True)
class MetricMatrix:
    """Dense score table indexed by (sample, system, metric); all cells finite."""

    metric_names: tuple[str, ...]
    scores: np.ndarray  # shape (n_samples, n_systems, n_metrics)

    def metric_index(self, name: str) -> int:
        try:
            return self.metric_names.index(name)
        except ValueError:
            raise MetricError(f"metric {name!r} not in matrix {self.metric_names}") from None

    def sample_row(self, sample_index: int) -> np.ndarray:
        """Flattened feature row, system-major then metric-minor."""
        if not 0 <= sample_index < self.scores.shape[0]:
            raise MetricError(f"sample index {sample_index} out of range")
        return self.scores[sample_index].reshape(-1).copy()


def build_metric_matrix(dataset: Dataset, metric_set: Sequence[MetricSpec]) -> MetricMatrix:
    """Compute internal metrics and copy external scores into one dense table."""
    if not metric_set:
        raise MetricError("metric_set must not be empty")
    shape = (dataset.n_samples, len(dataset.systems), len(metric_set))
    scores = np.zeros(shape, dtype=np.float64)
    for m, spec in enumerate(metric_set):
        if spec.kind == "internal":
            fn = _INTERNAL_FNS[spec.name]
            for i, sample in enumerate(dataset.samples):
                for j, sys_id in enumerate(dataset.systems):
                    scores[i, j, m] = fn(sample.outputs[sys_id], sample.references)
        else:
            for i, sample in enumerate(dataset.samples):
                per_system = (sample.external_metrics or {}).get(spec.name)
                for j, sys_id in enumerate(dataset.systems):
                    if per_system is None or sys_id not in per_system:
                        raise MetricError(
                            f"missing external metric {spec.name!r} for sample "
                            f"{sample.sample_id!r}, system {sys_id!r}"
                        )
                    scores[i, j, m] = per_system[sys_id]
    if not np.all(np.isfinite(scores)):
        raise MetricError("metric matrix contains non-finite cells")
    return MetricMatrix(tuple(s.name for s in metric_set), scores)
