"""Subset quality measurement: rank correlation, baselines, and reports.

The core question for any subset is whether ranking systems by their mean
human scores on the subset reproduces the ranking on the full population.
Kendall's tau-b (tie-corrected) answers it per aspect; top-ranked hits and
significance retention cover the coarser "did we keep the winner" and "did we
keep the significant gaps" views.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .config import RunConfig
from .dataset import Dataset
from .engine import _round_half_up, run_simulation
from .learner import QualityRanking
from .metrics import MetricMatrix
from .sampler import make_buckets


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class SystemMeans:
    aspect: str
    means: Mapping[str, float]


def system_means(dataset: Dataset, subset: Sequence[str], aspect: str) -> SystemMeans:
    """Mean human score per system over the given sample ids."""
    if not subset:
        raise EvaluationError("subset must not be empty")
    if aspect not in dataset.aspects:
        raise EvaluationError(f"unknown aspect {aspect!r}")
    totals = {sys_id: 0.0 for sys_id in dataset.systems}
    for sid in subset:
        sample = dataset.samples_by_id.get(sid)
        if sample is None:
            raise EvaluationError(f"unknown sample {sid!r}")
        if sample.human_scores is None:
            raise EvaluationError(f"sample {sid!r} has no human scores")
        for sys_id in dataset.systems:
            totals[sys_id] += sample.human_scores[sys_id][aspect]
    n = len(subset)
    return SystemMeans(aspect, {sys_id: totals[sys_id] / n for sys_id in dataset.systems})


def kendall_tau_b(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Tie-corrected Kendall rank correlation; None when every pair is tied.

    tau_b = (n_c - n_d) / sqrt((n0 - n1) (n0 - n2)) with n0 = n(n-1)/2 and
    n1, n2 the within-vector tied-pair counts. The undefined case is returned
    as None rather than coerced to 0 so reports can say so.
    """
    if len(x) != len(y):
        raise EvaluationError(f"length mismatch: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 2:
        raise EvaluationError("need at least 2 observations")
    concordant = discordant = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx != 0 and dy != 0:
                if (dx > 0) == (dy > 0):
                    concordant += 1
                else:
                    discordant += 1
    n0 = n * (n - 1) // 2
    n1 = sum(t * (t - 1) // 2 for t in Counter(x).values())
    n2 = sum(t * (t - 1) // 2 for t in Counter(y).values())
    denom = math.sqrt((n0 - n1) * (n0 - n2))
    if denom == 0.0:
        return None
    return (concordant - discordant) / denom


def subset_tau(dataset: Dataset, subset: Sequence[str], aspect: str) -> float | None:
    """tau-b between system means on the subset and on the full population."""
    sub = system_means(dataset, subset, aspect)
    full = system_means(dataset, [s.sample_id for s in dataset.samples], aspect)
    order = dataset.systems
    return kendall_tau_b(
        [sub.means[s] for s in order], [full.means[s] for s in order]
    )


def top_ranked_hit(subset_means: SystemMeans, full_means: SystemMeans) -> bool:
    """True when the subset's best system(s) intersect the population's."""
    if set(subset_means.means) != set(full_means.means):
        raise EvaluationError("system sets differ")
    sub_best = max(subset_means.means.values())
    full_best = max(full_means.means.values())
    sub_top = {s for s, v in subset_means.means.items() if v == sub_best}
    full_top = {s for s, v in full_means.means.items() if v == full_best}
    return bool(sub_top & full_top)


def _require_scores(dataset: Dataset) -> None:
    if not dataset.has_complete_human_scores():
        raise EvaluationError("baseline needs complete human scores")


@dataclass(frozen=True)
class RandomBaselineResult:
    subsets: Mapping[int, tuple[str, ...]]
    taus: Mapping[int, Mapping[str, float | None]]
    mean_taus: Mapping[str, float | None]


def random_subset(dataset: Dataset, rate: float, seed: int) -> list[str]:
    """Uniform sample without replacement of round(rate * N) ids.

    random.Random(seed) (Mersenne Twister) keeps each seed's subset
    reproducible everywhere.
    """
    ids = [s.sample_id for s in dataset.samples]
    k = _round_half_up(rate * len(ids))
    return sorted(random.Random(seed).sample(ids, k))


def random_baseline(
    dataset: Dataset, rate: float, seeds: Sequence[int]
) -> RandomBaselineResult:
    _require_scores(dataset)
    subsets = {seed: tuple(random_subset(dataset, rate, seed)) for seed in seeds}
    taus = {
        seed: {a: subset_tau(dataset, subset, a) for a in dataset.aspects}
        for seed, subset in subsets.items()
    }
    mean_taus = {}
    for aspect in dataset.aspects:
        defined = [taus[s][aspect] for s in seeds if taus[s][aspect] is not None]
        mean_taus[aspect] = sum(defined) / len(defined) if defined else None
    return RandomBaselineResult(subsets, taus, mean_taus)


def _mean_output_length(dataset: Dataset, sid: str) -> float:
    sample = dataset.samples_by_id[sid]
    lengths = [len(sample.outputs[sys_id].split()) for sys_id in dataset.systems]
    return sum(lengths) / len(lengths)


def heuristic_baseline(dataset: Dataset, rate: float, seed: int) -> list[str]:
    """Length-stratified pick: a few extreme-length samples, the rest typical.

    Samples sort by mean output token length; ceil(0.1 k) ids come from each
    length decile tail and the remainder from the middle 80%, all uniformly
    at random under the seed. When a stratum runs short the picker falls back
    to the nearest unused ranks.
    """
    _require_scores(dataset)
    ids = [s.sample_id for s in dataset.samples]
    n = len(ids)
    k = _round_half_up(rate * n)
    by_length = sorted(ids, key=lambda sid: (_mean_output_length(dataset, sid), sid))

    tail = math.ceil(0.1 * k)
    bottom_quota = min(tail, k)
    top_quota = min(tail, k - bottom_quota)
    middle_quota = k - bottom_quota - top_quota

    decile = math.ceil(0.1 * n)
    rng = random.Random(seed)
    chosen: set[str] = set()

    def pick(pool: list[str], quota: int, fallback: list[str]) -> None:
        available = [sid for sid in pool if sid not in chosen]
        take = min(quota, len(available))
        chosen.update(rng.sample(available, take))
        short = quota - take
        if short > 0:
            # nearest-rank fallback keeps the subset size exact
            for sid in fallback:
                if short == 0:
                    break
                if sid not in chosen:
                    chosen.add(sid)
                    short -= 1

    pick(by_length[:decile], bottom_quota, by_length)
    pick(by_length[n - decile :], top_quota, list(reversed(by_length)))
    middle = by_length[decile : n - decile]
    pick(middle, middle_quota, by_length)
    return sorted(chosen)


def _min_max_normalize(values: np.ndarray) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def _systematic_initials(scores: Mapping[str, float], k: int) -> list[str]:
    ranking = QualityRanking.from_scores(scores)
    return [b.initial for b in make_buckets(ranking, k)]


def metric_average_subset(dataset: Dataset, rate: float, matrix: MetricMatrix) -> list[str]:
    """Single systematic pass ranked by the normalized mean of all metrics."""
    per_metric = [
        _min_max_normalize(matrix.scores[:, :, m])
        for m in range(len(matrix.metric_names))
    ]
    quality = np.mean([p.mean(axis=1) for p in per_metric], axis=0)
    ids = [s.sample_id for s in dataset.samples]
    k = _round_half_up(rate * len(ids))
    return _systematic_initials(
        {sid: float(q) for sid, q in zip(ids, quality)}, k
    )


def preliminary_metric_subset(
    dataset: Dataset, rate: float, matrix: MetricMatrix, metric: str
) -> list[str]:
    """Single systematic pass ranked by one metric's per-sample mean."""
    m = matrix.metric_index(metric)
    quality = matrix.scores[:, :, m].mean(axis=1)
    ids = [s.sample_id for s in dataset.samples]
    k = _round_half_up(rate * len(ids))
    return _systematic_initials(
        {sid: float(q) for sid, q in zip(ids, quality)}, k
    )


def online_subset(dataset: Dataset, config: RunConfig) -> list[str]:
    """Full multi-phase run with the redundancy controller switched off."""
    result = run_simulation(dataset, config.with_overrides(tau=1.0))
    return list(result.subset)


def ablation_subset(
    dataset: Dataset,
    rate: float,
    mode: str,
    *,
    matrix: MetricMatrix | None = None,
    preliminary_metric: str | None = None,
    config: RunConfig | None = None,
) -> list[str]:
    if mode == "eight_metric":
        if matrix is None:
            raise EvaluationError("eight_metric mode needs a metric matrix")
        return metric_average_subset(dataset, rate, matrix)
    if mode == "single_metric":
        if matrix is None or preliminary_metric is None:
            raise EvaluationError("single_metric mode needs a matrix and metric name")
        return preliminary_metric_subset(dataset, rate, matrix, preliminary_metric)
    if mode == "online":
        if config is None:
            raise EvaluationError("online mode needs a run config")
        return online_subset(dataset, config.with_overrides(rate=rate))
    raise EvaluationError(f"unknown ablation mode {mode!r}")


def _midranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for idx in order[i : j + 1]:
            ranks[idx] = avg
        i = j + 1
    return ranks


def _exact_wilcoxon_p(doubled_ranks: list[int], w_min_doubled: int) -> float:
    # distribution of 2*W+ over all sign assignments, by polynomial counting
    total = sum(doubled_ranks)
    ways = [0] * (total + 1)
    ways[0] = 1
    for r in doubled_ranks:
        for s in range(total, r - 1, -1):
            ways[s] += ways[s - r]
    count = sum(ways[: w_min_doubled + 1])
    p = 2.0 * count / (1 << len(doubled_ranks))
    return min(1.0, p)


def _normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def wilcoxon_signed_rank(x: Sequence[float], y: Sequence[float]) -> float:
    """Two-sided signed-rank p-value on paired observations.

    Zero differences are dropped; with none left the result is 1.0. The null
    distribution is enumerated exactly up to 20 remaining pairs, and
    approximated normally (continuity-corrected, tie-adjusted) above.
    """
    if len(x) != len(y):
        raise EvaluationError(f"length mismatch: {len(x)} vs {len(y)}")
    if not x:
        raise EvaluationError("need at least 1 pair")
    diffs = [a - b for a, b in zip(x, y) if a != b]
    n = len(diffs)
    if n == 0:
        return 1.0
    abs_diffs = [abs(d) for d in diffs]
    ranks = _midranks(abs_diffs)
    w_plus = sum(r for r, d in zip(ranks, diffs) if d > 0)
    w_minus = sum(r for r, d in zip(ranks, diffs) if d < 0)
    w_min = min(w_plus, w_minus)

    if n <= 20:
        doubled = [int(round(2 * r)) for r in ranks]
        return _exact_wilcoxon_p(doubled, int(round(2 * w_min)))

    mean = n * (n + 1) / 4.0
    tie_sizes = Counter(abs_diffs).values()
    variance = (n * (n + 1) * (2 * n + 1) - sum(t**3 - t for t in tie_sizes) / 2.0) / 24.0
    if variance == 0.0:
        return 1.0
    z = (w_min - mean + 0.5) / math.sqrt(variance)
    return min(1.0, 2.0 * _normal_cdf(z))


def significance_retention(
    dataset: Dataset, subset: Sequence[str], alpha: float
) -> float:
    """Fraction of (aspect, system-pair) significance verdicts the subset keeps.

    Each cell is classified significant-with-direction or not-significant via
    the signed-rank test over per-sample paired scores; the verdicts on the
    subset must match the verdicts on the full population.
    """
    _require_scores(dataset)
    full_ids = [s.sample_id for s in dataset.samples]

    def classify(ids: Sequence[str], aspect: str, sys_a: str, sys_b: str):
        xs = [dataset.samples_by_id[sid].human_scores[sys_a][aspect] for sid in ids]
        ys = [dataset.samples_by_id[sid].human_scores[sys_b][aspect] for sid in ids]
        p = wilcoxon_signed_rank(xs, ys)
        if p >= alpha:
            return ("ns",)
        gap = sum(xs) / len(xs) - sum(ys) / len(ys)
        return ("sig", 0 if gap == 0 else math.copysign(1, gap))

    matches = 0
    cells = 0
    for aspect in dataset.aspects:
        for i, sys_a in enumerate(dataset.systems):
            for sys_b in dataset.systems[i + 1 :]:
                cells += 1
                if classify(full_ids, aspect, sys_a, sys_b) == classify(
                    subset, aspect, sys_a, sys_b
                ):
                    matches += 1
    return matches / cells


@dataclass(frozen=True)
class ReportRow:
    aspect: str
    method: str
    tau: float | None
    top_hit: float  # 1.0/0.0 for single subsets, a rate for mean columns


@dataclass(frozen=True)
class RankingReport:
    dataset_name: str
    config_digest: str
    methods: tuple[str, ...]
    rows: tuple[ReportRow, ...]
    aggregates: Mapping[str, Mapping[str, float | None]]
    notes: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset_name,
            "config_digest": self.config_digest,
            "tie_handling": "kendall_tau_b",
            "methods": list(self.methods),
            "rows": [
                {
                    "aspect": r.aspect,
                    "method": r.method,
                    "tau": r.tau if r.tau is not None else "undefined",
                    "top_hit": r.top_hit,
                }
                for r in self.rows
            ],
            "aggregates": {m: dict(v) for m, v in self.aggregates.items()},
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        import json

        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_markdown(self) -> str:
        aspects = sorted({r.aspect for r in self.rows})
        cell = {(r.aspect, r.method): r for r in self.rows}
        lines = [
            "| Aspect | " + " | ".join(self.methods) + " |",
            "| --- | " + " | ".join("---" for _ in self.methods) + " |",
        ]
        for aspect in aspects:
            rendered = []
            for m in self.methods:
                r = cell.get((aspect, m))
                rendered.append(
                    "undefined" if r is None or r.tau is None else f"{r.tau:.2f}"
                )
            lines.append(f"| {aspect} | " + " | ".join(rendered) + " |")
        overall = []
        top1 = []
        for m in self.methods:
            agg = self.aggregates[m]
            mean_tau = agg["mean_tau"]
            overall.append("undefined" if mean_tau is None else f"{mean_tau:.2f}")
            top1.append(f"{agg['top1_accuracy']:.2f}")
        lines.append("| Overall | " + " | ".join(overall) + " |")
        lines.append("| Top-1 accuracy | " + " | ".join(top1) + " |")
        for note in self.notes:
            lines.append("")
            lines.append(f"*{note}*")
        return "\n".join(lines) + "\n"


def build_report(
    dataset: Dataset,
    method_subsets: Mapping[str, Sequence[str]],
    *,
    mean_groups: Mapping[str, Sequence[str]] | None = None,
    dataset_name: str = "dataset",
    config_digest: str = "",
) -> RankingReport:
    """Tau and top-hit per (aspect, method), plus mean columns and aggregates.

    mean_groups maps a derived column (e.g. "R Mean") to the member columns
    it averages. Undefined taus are excluded from averages and footnoted.
    """
    full_ids = [s.sample_id for s in dataset.samples]
    full_means = {a: system_means(dataset, full_ids, a) for a in dataset.aspects}

    rows: list[ReportRow] = []
    undefined_cells = []
    per_method: dict[str, list[ReportRow]] = {m: [] for m in method_subsets}
    for method, subset in method_subsets.items():
        for aspect in dataset.aspects:
            sub_means = system_means(dataset, subset, aspect)
            tau = kendall_tau_b(
                [sub_means.means[s] for s in dataset.systems],
                [full_means[aspect].means[s] for s in dataset.systems],
            )
            if tau is None:
                undefined_cells.append((aspect, method))
            hit = float(top_ranked_hit(sub_means, full_means[aspect]))
            row = ReportRow(aspect, method, tau, hit)
            rows.append(row)
            per_method[method].append(row)

    methods = list(method_subsets)
    for group, members in (mean_groups or {}).items():
        for aspect in dataset.aspects:
            member_rows = [
                r for m in members for r in per_method[m] if r.aspect == aspect
            ]
            defined = [r.tau for r in member_rows if r.tau is not None]
            tau = sum(defined) / len(defined) if defined else None
            hit = sum(r.top_hit for r in member_rows) / len(member_rows)
            rows.append(ReportRow(aspect, group, tau, hit))
        methods.append(group)

    by_method: dict[str, list[ReportRow]] = {m: [] for m in methods}
    for row in rows:
        by_method[row.method].append(row)
    aggregates = {}
    for method in methods:
        defined = [r.tau for r in by_method[method] if r.tau is not None]
        aggregates[method] = {
            "mean_tau": sum(defined) / len(defined) if defined else None,
            "tau_defined_cells": float(len(defined)),
            "top1_accuracy": sum(r.top_hit for r in by_method[method])
            / len(by_method[method]),
        }

    notes = []
    if undefined_cells:
        cells = ", ".join(f"({a}, {m})" for a, m in sorted(undefined_cells))
        notes.append(f"tau undefined (all means tied) and excluded from averages: {cells}")
    return RankingReport(
        dataset_name=dataset_name,
        config_digest=config_digest,
        methods=tuple(methods),
        rows=tuple(rows),
        aggregates=aggregates,
        notes=tuple(notes),
    )
