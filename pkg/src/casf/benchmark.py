"""Synthetic-oracle benchmark: active sampling vs. random subsets.

For each generator seed the harness builds a dataset with known latent
quality, runs the full multi-phase pipeline once, scores many random subsets
of the same size, and compares the mean subset-vs-population ranking
correlation of the two approaches.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import RunConfig
from .dataset import Dataset
from .engine import _round_half_up, run_simulation
from .evaluation import kendall_tau_b
from .synthetic import make_synthetic_dataset


def _mean_tau(dataset: Dataset, subset_mask: np.ndarray, scores: np.ndarray) -> float:
    """Average tau over aspects between subset and full-population system means.

    scores has shape (N, M, K); undefined taus (all means tied) count as 0
    concordance here, which cannot occur with continuous scores.
    """
    full_means = scores.mean(axis=0)  # (M, K)
    sub_means = scores[subset_mask].mean(axis=0)
    taus = []
    for k in range(scores.shape[2]):
        tau = kendall_tau_b(list(sub_means[:, k]), list(full_means[:, k]))
        taus.append(0.0 if tau is None else tau)
    return float(np.mean(taus))


def _score_tensor(dataset: Dataset) -> np.ndarray:
    n, m, k = len(dataset.samples), len(dataset.systems), len(dataset.aspects)
    scores = np.empty((n, m, k))
    for i, sample in enumerate(dataset.samples):
        for j, sys_id in enumerate(dataset.systems):
            for a, aspect in enumerate(dataset.aspects):
                scores[i, j, a] = sample.human_scores[sys_id][aspect]
    return scores


@dataclass(frozen=True)
class SeedOutcome:
    seed: int
    casf_tau: float
    random_mean_tau: float


@dataclass(frozen=True)
class BenchmarkResult:
    outcomes: tuple[SeedOutcome, ...]

    @property
    def casf_mean(self) -> float:
        return float(np.mean([o.casf_tau for o in self.outcomes]))

    @property
    def random_mean(self) -> float:
        return float(np.mean([o.random_mean_tau for o in self.outcomes]))

    @property
    def gap(self) -> float:
        return self.casf_mean - self.random_mean


def run_seed(
    seed: int,
    n_samples: int = 200,
    n_systems: int = 5,
    n_aspects: int = 2,
    rate: float = 0.5,
    phases: int = 5,
    n_random: int = 100,
) -> SeedOutcome:
    dataset = make_synthetic_dataset(
        seed, n_samples=n_samples, n_systems=n_systems, n_aspects=n_aspects
    )
    config = RunConfig(rate=rate, phase_count=phases)
    result = run_simulation(dataset, config)

    scores = _score_tensor(dataset)
    index = dataset.sample_index
    casf_mask = np.zeros(len(dataset.samples), dtype=bool)
    casf_mask[[index[sid] for sid in result.subset]] = True
    casf_tau = _mean_tau(dataset, casf_mask, scores)

    k = _round_half_up(rate * n_samples)
    rng = np.random.default_rng(10_000_019 + seed)
    random_taus = []
    for _ in range(n_random):
        mask = np.zeros(len(dataset.samples), dtype=bool)
        mask[rng.choice(len(dataset.samples), size=k, replace=False)] = True
        random_taus.append(_mean_tau(dataset, mask, scores))
    return SeedOutcome(seed, casf_tau, float(np.mean(random_taus)))


def run_benchmark(seeds: Sequence[int], **kwargs) -> BenchmarkResult:
    return BenchmarkResult(tuple(run_seed(seed, **kwargs) for seed in seeds))
