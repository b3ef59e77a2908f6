from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from casf.dataset import Dataset, Sample


def tiny_sample(
    sid: str,
    outputs: dict[str, str],
    scores: dict[str, dict[str, float]] | None = None,
    references: tuple[str, ...] = ("the quick brown fox",),
    external: dict[str, dict[str, float]] | None = None,
) -> Sample:
    return Sample(
        sample_id=sid,
        source=f"source for {sid}",
        references=references,
        outputs=outputs,
        human_scores=scores,
        external_metrics=external,
    )


@pytest.fixture
def two_system_dataset() -> Dataset:
    """Five samples, two systems, one aspect; distinct enough for ranking."""
    samples = []
    for i in range(5):
        samples.append(
            tiny_sample(
                f"s{i}",
                {
                    "sysA": f"output alpha {i} from system a number {i}",
                    "sysB": f"output beta {i} from system b number {i}",
                },
                {
                    "sysA": {"quality": float(i)},
                    "sysB": {"quality": float(5 - i)},
                },
            )
        )
    return Dataset.from_samples(samples)
