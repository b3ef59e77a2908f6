"""Redundancy-constrained selection of one final sample per bucket.

A candidate is feasible when none of its system outputs is near-duplicate
text of an already-selected sample's output from the same system. Feasible
candidates compete on rank distance to the bucket's initial selection sample;
infeasible ones compete on how redundant they are.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .dataset import Dataset, Sample
from .metrics import _dice, _ngram_counts, bigram_dice, tokenize
from .sampler import Bucket

Similarity = Callable[[Sample, Sample], float]


@dataclass(frozen=True)
class ControllerConfig:
    tau: float = 0.5  # outputs with Dice similarity above this count as redundant

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must be in [0, 1], got {self.tau}")


def pairwise_similarity(a: Sample, b: Sample) -> float:
    """Max same-system bigram similarity between two samples' outputs.

    Comparing only same-system pairs keeps system style out of the
    redundancy signal.
    """
    return max(bigram_dice(a.outputs[j], b.outputs[j]) for j in a.outputs)


class SimilarityIndex:
    """Memoized pairwise similarity over one dataset.

    Selection revisits the same (candidate, selected) pairs phase after
    phase; caching tokenized bigrams and pair results keeps multi-phase runs
    fast without touching the similarity definition.
    """

    def __init__(self, dataset: Dataset):
        self._systems = dataset.systems
        self._grams: dict[tuple[str, str], tuple] = {}
        self._pairs: dict[tuple[str, str], float] = {}
        for sample in dataset.samples:
            for sys_id in self._systems:
                tokens = tokenize(sample.outputs[sys_id])
                counts = _ngram_counts(tokens, 2)
                self._grams[(sample.sample_id, sys_id)] = (
                    counts,
                    sum(counts.values()),
                    len(tokens) < 2,
                    tuple(tokens) if len(tokens) < 2 else None,
                )

    def __call__(self, a: Sample, b: Sample) -> float:
        key = (a.sample_id, b.sample_id) if a.sample_id <= b.sample_id else (b.sample_id, a.sample_id)
        cached = self._pairs.get(key)
        if cached is not None:
            return cached
        best = 0.0
        for sys_id in self._systems:
            ca, ta, short_a, tok_a = self._grams[(a.sample_id, sys_id)]
            cb, tb, short_b, tok_b = self._grams[(b.sample_id, sys_id)]
            if ta == 0 or tb == 0:
                value = 1.0 if short_a and short_b and tok_a == tok_b else 0.0
            else:
                value = _dice(ca, ta, cb, tb)
            if value > best:
                best = value
                if best == 1.0:
                    break
        self._pairs[key] = best
        return best


def redundancy_violation(
    candidate: Sample,
    selected: Sequence[Sample],
    cfg: ControllerConfig,
    similarity: Similarity = pairwise_similarity,
) -> float:
    """How far past the threshold the candidate's worst near-duplicate sits.

    0 means feasible. The aggregate over selected samples is a max, not a
    sum: one near-duplicate is enough to make a candidate redundant.
    """
    if not selected or cfg.tau >= 1.0:
        return 0.0
    worst = max(similarity(candidate, s) for s in selected)
    return max(0.0, worst - cfg.tau)


def rank_distance(candidate_rank: int, initial_rank: int) -> int:
    return abs(candidate_rank - initial_rank)


def select_from_bucket(
    bucket: Bucket,
    selected: Sequence[Sample],
    samples_by_id: Mapping[str, Sample],
    cfg: ControllerConfig,
    similarity: Similarity = pairwise_similarity,
) -> str:
    """Pick the bucket member under the three-rule order.

    Feasible beats infeasible; among infeasible, lower violation wins; among
    feasible, smaller rank distance to the initial selection sample wins.
    Remaining ties go to the lower quality rank, then the smaller sample_id.
    """
    lo = bucket.rank_range[0]
    best_key: tuple | None = None
    best_id = bucket.members[0]
    for offset, sid in enumerate(bucket.members):
        violation = redundancy_violation(samples_by_id[sid], selected, cfg, similarity)
        rank = lo + offset
        if violation == 0.0:
            key = (0, float(rank_distance(rank, lo)), rank, sid)
        else:
            key = (1, violation, rank, sid)
        if best_key is None or key < best_key:
            best_key = key
            best_id = sid
    return best_id


def select_phase(
    buckets: Sequence[Bucket],
    prior_selected: Sequence[Sample],
    samples_by_id: Mapping[str, Sample],
    cfg: ControllerConfig,
    similarity: Similarity = pairwise_similarity,
) -> list[str]:
    """Select one sample per bucket, in ascending bucket order.

    The redundancy reference set grows as the phase progresses: each pick is
    checked against everything selected in earlier phases plus the buckets
    already decided in this one.
    """
    selected = list(prior_selected)
    chosen: list[str] = []
    for bucket in sorted(buckets, key=lambda b: b.index):
        sid = select_from_bucket(bucket, selected, samples_by_id, cfg, similarity)
        chosen.append(sid)
        selected.append(samples_by_id[sid])
    return chosen
