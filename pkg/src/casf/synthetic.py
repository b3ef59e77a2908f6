"""Synthetic evaluation populations with a known quality ground truth.

Each dataset has a latent per-sample quality level. Every system's human
score follows its own response curve over that quality (a shared linear trend
plus a per-system curvature term) with additive noise, so the population-level
system ranking is only reproduced by subsets whose quality-level coverage
matches the population. Subsets that bunch in one quality region, the failure
mode of random sampling, shift the curvature terms and flip closely ranked
systems. Outputs are built by corrupting the reference with noise increasing
in (1 - quality), which makes the lexical metrics informative-but-imperfect
quality predictors.
"""

from __future__ import annotations

import numpy as np

from .dataset import Dataset, Sample

_VOCAB_SIZE = 60
_NOISE_VOCAB_SIZE = 400


def _token(i: int) -> str:
    return f"w{i:03d}"


def _noise_token(i: int) -> str:
    return f"z{i:03d}"


def make_synthetic_dataset(
    seed: int,
    n_samples: int = 200,
    n_systems: int = 5,
    n_aspects: int = 2,
    score_noise_sd: float = 0.03,
    slope_scale: float = 1.0,
    curvature_scale: float = 4.0,
    metric_noise_sd: float = 0.18,
    gap_range: tuple[float, float] = (0.012, 0.05),
) -> Dataset:
    """Build a dataset whose correct subset behavior is known by construction.

    numpy's default_rng (PCG64) drives every draw, so each seed maps to one
    fixed dataset.
    """
    rng = np.random.default_rng(seed)
    quality = rng.uniform(size=n_samples)
    systems = [f"sys{j + 1}" for j in range(n_systems)]
    aspects = [f"aspect{k + 1}" for k in range(n_aspects)]

    # Full-population system means sit close together so that subsets with a
    # skewed quality mix flip adjacent systems.
    gaps = rng.uniform(gap_range[0], gap_range[1], size=(n_aspects, n_systems - 1))
    levels = np.concatenate(
        [np.zeros((n_aspects, 1)), np.cumsum(gaps, axis=1)], axis=1
    ) + 3.0
    for k in range(n_aspects):
        rng.shuffle(levels[k])

    common_slope = 2.0  # easy samples score high for every system
    slopes = rng.uniform(-slope_scale, slope_scale, size=(n_aspects, n_systems))
    curvatures = rng.uniform(-curvature_scale, curvature_scale, size=(n_aspects, n_systems))
    centered = quality - quality.mean()
    bend = centered**2 - (centered**2).mean()  # zero-mean over the population

    score_noise = rng.normal(0.0, score_noise_sd, size=(n_samples, n_systems, n_aspects))
    scores = np.empty((n_samples, n_systems, n_aspects))
    for k in range(n_aspects):
        for j in range(n_systems):
            scores[:, j, k] = (
                levels[k, j]
                + (common_slope + slopes[k, j]) * centered
                + curvatures[k, j] * bend
                + score_noise[:, j, k]
            )

    system_offsets = np.linspace(-0.05, 0.05, n_systems)
    samples = []
    for i in range(n_samples):
        ref_len = int(rng.integers(10, 17))
        ref_tokens = [_token(int(t)) for t in rng.integers(0, _VOCAB_SIZE, size=ref_len)]
        outputs = {}
        for j, sys_id in enumerate(systems):
            corrupt_p = float(
                np.clip(
                    0.1
                    + 0.6 * (1.0 - quality[i])
                    + system_offsets[j]
                    + rng.normal(0.0, metric_noise_sd),
                    0.02,
                    0.95,
                )
            )
            # corrupt an exact token count: keeps the metric-vs-quality
            # correlation at its designed level instead of adding binomial
            # spread on top
            n_corrupt = int(round(corrupt_p * ref_len))
            positions = set(
                int(p) for p in rng.choice(ref_len, size=n_corrupt, replace=False)
            )
            out_tokens = [
                _noise_token(int(rng.integers(0, _NOISE_VOCAB_SIZE)))
                if t in positions
                else tok
                for t, tok in enumerate(ref_tokens)
            ]
            outputs[sys_id] = " ".join(out_tokens)
        human = {
            sys_id: {aspects[k]: float(scores[i, j, k]) for k in range(n_aspects)}
            for j, sys_id in enumerate(systems)
        }
        samples.append(
            Sample(
                sample_id=f"s{i:04d}",
                source=f"source text {i}",
                references=(" ".join(ref_tokens),),
                outputs=outputs,
                human_scores=human,
            )
        )
    return Dataset.from_samples(samples)


def latent_quality(seed: int, n_samples: int = 200) -> np.ndarray:
    """The quality draw make_synthetic_dataset(seed, n_samples, ...) used."""
    return np.random.default_rng(seed).uniform(size=n_samples)
