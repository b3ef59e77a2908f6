"""Evaluation population model: inputs, per-system outputs, and human scores.

A dataset is immutable after loading. System and aspect orderings are
lexicographic so that every downstream feature vector and report is a
deterministic function of the file content.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence


class DatasetError(ValueError):
    """Raised when a dataset file or record violates the schema."""


@dataclass(frozen=True)
class Sample:
    """One evaluation item: a source input and the texts each system produced."""

    sample_id: str
    source: str
    references: tuple[str, ...] = ()
    outputs: Mapping[str, str] = field(default_factory=dict)
    human_scores: Mapping[str, Mapping[str, float]] | None = None
    external_metrics: Mapping[str, Mapping[str, float]] | None = None


@dataclass(frozen=True)
class Dataset:
    samples: tuple[Sample, ...]
    systems: tuple[str, ...]
    aspects: tuple[str, ...]

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    @cached_property
    def samples_by_id(self) -> dict[str, Sample]:
        return {s.sample_id: s for s in self.samples}

    @cached_property
    def sample_index(self) -> dict[str, int]:
        return {s.sample_id: i for i, s in enumerate(self.samples)}

    def has_complete_human_scores(self) -> bool:
        return all(s.human_scores is not None for s in self.samples)

    @classmethod
    def from_samples(
        cls, samples: Sequence[Sample], aspects: Sequence[str] | None = None
    ) -> "Dataset":
        """Assemble and check a dataset from raw samples.

        Systems and aspects are the lexicographically sorted unions across
        samples; `aspects` overrides the inference (needed when no sample
        carries human scores yet, e.g. before a live annotation session).
        """
        if not samples:
            raise DatasetError("dataset has no samples")
        seen: set[str] = set()
        for s in samples:
            if not s.sample_id:
                raise DatasetError("empty sample_id")
            if s.sample_id in seen:
                raise DatasetError(f"duplicate sample_id {s.sample_id!r}")
            seen.add(s.sample_id)

        systems = sorted(samples[0].outputs)
        if len(systems) < 2:
            raise DatasetError("at least 2 systems are required")
        for s in samples:
            if sorted(s.outputs) != systems:
                raise DatasetError(
                    f"sample {s.sample_id!r} does not cover the system set "
                    f"{systems} (got {sorted(s.outputs)})"
                )

        if aspects is not None:
            aspect_list = sorted(set(aspects))
        else:
            inferred: set[str] = set()
            for s in samples:
                if s.human_scores:
                    for per_aspect in s.human_scores.values():
                        inferred.update(per_aspect)
            aspect_list = sorted(inferred)
        if not aspect_list:
            raise DatasetError(
                "no human-score aspects found; pass them explicitly for "
                "datasets annotated later"
            )

        for s in samples:
            _check_sample_scores(s, systems, aspect_list)

        return cls(tuple(samples), tuple(systems), tuple(aspect_list))


def _check_sample_scores(s: Sample, systems: list[str], aspects: list[str]) -> None:
    if s.human_scores is not None:
        if sorted(s.human_scores) != systems:
            raise DatasetError(
                f"sample {s.sample_id!r}: human_scores must cover every system"
            )
        for sys_id, per_aspect in s.human_scores.items():
            if sorted(per_aspect) != aspects:
                raise DatasetError(
                    f"sample {s.sample_id!r}: human_scores[{sys_id!r}] must "
                    f"cover every aspect {aspects}"
                )
            for aspect, val in per_aspect.items():
                if not math.isfinite(val):
                    raise DatasetError(
                        f"sample {s.sample_id!r}: non-finite human score for "
                        f"({sys_id}, {aspect})"
                    )
    if s.external_metrics is not None:
        for metric, per_system in s.external_metrics.items():
            for sys_id, val in per_system.items():
                if not math.isfinite(val):
                    raise DatasetError(
                        f"sample {s.sample_id!r}: non-finite external metric "
                        f"{metric!r} for system {sys_id!r}"
                    )


@dataclass(frozen=True)
class ValidationReport:
    """Report-only check of metric coverage; errors empty means loadable."""

    errors: tuple[tuple[str, str], ...]
    warnings: tuple[str, ...]
    metric_coverage: Mapping[str, float]

    @property
    def ok(self) -> bool:
        return not self.errors


def _sample_from_record(record: dict, line_no: int) -> Sample:
    try:
        sample_id = record["sample_id"]
        source = record["source"]
        outputs = record["outputs"]
    except KeyError as exc:
        raise DatasetError(f"line {line_no}: missing required field {exc}") from exc
    if not isinstance(outputs, dict) or not outputs:
        raise DatasetError(f"line {line_no}: outputs must be a non-empty object")
    references = tuple(record.get("references") or ())
    human = record.get("human_scores")
    external = record.get("external_metrics")
    return Sample(
        sample_id=str(sample_id),
        source=str(source),
        references=tuple(str(r) for r in references),
        outputs={str(k): str(v) for k, v in outputs.items()},
        human_scores=(
            {
                str(sys_id): {str(a): float(v) for a, v in per.items()}
                for sys_id, per in human.items()
            }
            if human is not None
            else None
        ),
        external_metrics=(
            {
                str(m): {str(sys_id): float(v) for sys_id, v in per.items()}
                for m, per in external.items()
            }
            if external is not None
            else None
        ),
    )


def load_dataset(
    path: str | Path,
    format: str = "jsonl",
    sidecar: str | Path | None = None,
    aspects: Sequence[str] | None = None,
) -> Dataset:
    """Load a JSONL dataset, optionally merging an external metric sidecar.

    One JSON object per line:
    {"sample_id", "source", "references", "outputs", "human_scores"?,
     "external_metrics"?}. Parse failures report the line number.
    """
    if format != "jsonl":
        raise DatasetError(f"unsupported format {format!r}")
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")

    samples: list[Sample] = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
        if not isinstance(record, dict):
            raise DatasetError(f"line {line_no}: each line must be a JSON object")
        samples.append(_sample_from_record(record, line_no))

    if sidecar is not None:
        samples = merge_metric_sidecar(samples, Path(sidecar))
    return Dataset.from_samples(samples, aspects=aspects)


def merge_metric_sidecar(samples: Sequence[Sample], path: Path) -> list[Sample]:
    """Merge a {metric: {sample_id: {system_id: score}}} sidecar into samples."""
    payload = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(payload, dict):
        raise DatasetError(f"sidecar {path}: expected a JSON object")
    merged: list[Sample] = []
    for s in samples:
        extra: dict[str, dict[str, float]] = (
            {m: dict(per) for m, per in s.external_metrics.items()}
            if s.external_metrics
            else {}
        )
        for metric, per_sample in payload.items():
            cells = per_sample.get(s.sample_id)
            if cells:
                bucket = extra.setdefault(str(metric), {})
                for sys_id, val in cells.items():
                    bucket[str(sys_id)] = float(val)
        merged.append(
            Sample(
                sample_id=s.sample_id,
                source=s.source,
                references=s.references,
                outputs=s.outputs,
                human_scores=s.human_scores,
                external_metrics=extra or None,
            )
        )
    return merged


def validate(dataset: Dataset, required_metrics: Sequence[str]) -> ValidationReport:
    """Check external-metric coverage; one error per missing (sample, system) cell."""
    errors: list[tuple[str, str]] = []
    warnings: list[str] = []
    coverage: dict[str, float] = {}
    total = dataset.n_samples * len(dataset.systems)
    for metric in required_metrics:
        present = 0
        for s in dataset.samples:
            per_system = (s.external_metrics or {}).get(metric, {})
            for sys_id in dataset.systems:
                if sys_id in per_system:
                    present += 1
                else:
                    errors.append(
                        (s.sample_id, f"missing {metric!r} score for system {sys_id!r}")
                    )
        coverage[metric] = present / total
    if any(not s.references for s in dataset.samples):
        warnings.append(
            "some samples have no references; lexical metrics score them 0"
        )
    return ValidationReport(tuple(errors), tuple(warnings), coverage)


def serialize_dataset(dataset: Dataset) -> str:
    """Render a dataset back to JSONL; inverse of load_dataset."""
    lines = []
    for s in dataset.samples:
        record: dict = {
            "sample_id": s.sample_id,
            "source": s.source,
            "references": list(s.references),
            "outputs": dict(s.outputs),
        }
        if s.human_scores is not None:
            record["human_scores"] = {
                k: dict(v) for k, v in s.human_scores.items()
            }
        if s.external_metrics is not None:
            record["external_metrics"] = {
                k: dict(v) for k, v in s.external_metrics.items()
            }
        lines.append(json.dumps(record, ensure_ascii=False, sort_keys=True))
    return "\n".join(lines) + "\n"
