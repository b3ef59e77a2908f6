"""Rank-interval bucketing for systematic sampling.

Sampling at a fixed rank interval spreads the selection across every quality
level, which is what protects the subset against clustered selection.
"""

from __future__ import annotations

from dataclasses import dataclass

from .learner import QualityRanking


class SamplerError(ValueError):
    pass


@dataclass(frozen=True)
class Bucket:
    """One rank interval; `initial` is the member at the interval's first rank."""

    index: int
    rank_range: tuple[int, int]  # half-open [lo, hi)
    members: tuple[str, ...]  # ascending quality rank
    initial: str


def make_buckets(ranking: QualityRanking, n_buckets: int) -> list[Bucket]:
    """Partition the ranked pool into n_buckets contiguous rank intervals.

    With w = floor(N / n_buckets), bucket e covers ranks [e*w, (e+1)*w); the
    last bucket absorbs the N mod n_buckets remainder so the intervals cover
    every rank. Initial selection samples sit at ranks 0, w, 2w, ...
    """
    n = len(ranking)
    if n_buckets < 1:
        raise SamplerError("bucket count must be at least 1")
    if n_buckets > n:
        raise SamplerError(f"quota {n_buckets} exceeds pool size {n}")
    order = ranking.order
    width = n // n_buckets
    buckets = []
    for e in range(n_buckets):
        lo = e * width
        hi = (e + 1) * width if e < n_buckets - 1 else n
        members = tuple(order[lo:hi])
        buckets.append(Bucket(e, (lo, hi), members, members[0]))
    return buckets
