"""Multi-phase sampling engine with resumable state.

Phase 0 ranks every sample with one automatic metric and takes a systematic
slice. Each later phase retrains the quality learner on everything annotated
so far, re-ranks the remaining pool, and selects the next batch through the
systematic sampler and the redundancy controller. Under the simulated oracle
the whole run is a pure function of (dataset, config); under the live oracle
the state blocks on score ingestion and can be persisted and resumed at any
point.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .config import RunConfig
from .controller import ControllerConfig, SimilarityIndex, select_phase
from .dataset import Dataset
from .learner import (
    GbdtModel,
    build_targets,
    fit_gbdt,
    predict_quality,
    preliminary_quality,
)
from .metrics import MetricMatrix, build_metric_matrix
from .sampler import make_buckets

STATE_VERSION = 1

AWAITING_ANNOTATION = "awaiting_annotation"
READY_TO_SELECT = "ready_to_select"
COMPLETE = "complete"


class EngineError(ValueError):
    pass


@dataclass(frozen=True)
class PhasePlan:
    rate: float
    phase_count: int
    quotas: tuple[int, ...]
    mode: str

    @property
    def total(self) -> int:
        return sum(self.quotas)


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def _largest_remainder(total: int, parts: int) -> list[int]:
    # equal shares, surplus to the earliest parts
    base, rem = divmod(total, parts)
    return [base + 1] * rem + [base] * (parts - rem)


def plan_phases(
    n_samples: int,
    rate: float,
    phase_count: int,
    mode: str = "average",
    preliminary_ratio: float | None = None,
) -> PhasePlan:
    """Split the overall budget round(rate * N) into per-phase quotas.

    Average mode divides the budget near-equally. Preliminary-fixed mode pins
    the phase-0 quota at round(preliminary_ratio * N) and divides the rest.
    """
    if not 0.0 < rate <= 1.0:
        raise EngineError(f"sampling rate must be in (0, 1], got {rate}")
    budget = _round_half_up(rate * n_samples)
    if phase_count < 1:
        raise EngineError("phase_count must be at least 1")
    if budget < phase_count:
        raise EngineError(
            f"budget {budget} cannot give each of {phase_count} phases a sample"
        )
    if mode == "average":
        quotas = _largest_remainder(budget, phase_count)
    elif mode == "preliminary_fixed":
        if preliminary_ratio is None:
            raise EngineError("preliminary_fixed mode requires preliminary_ratio")
        n0 = _round_half_up(preliminary_ratio * n_samples)
        if phase_count == 1:
            if n0 != budget:
                raise EngineError(
                    f"single-phase plan needs preliminary quota {budget}, got {n0}"
                )
            quotas = [budget]
        else:
            if n0 < 1 or budget - n0 < phase_count - 1:
                raise EngineError(
                    f"preliminary quota {n0} leaves too little for "
                    f"{phase_count - 1} batch phases (budget {budget})"
                )
            quotas = [n0] + _largest_remainder(budget - n0, phase_count - 1)
    else:
        raise EngineError(f"unknown plan mode {mode!r}")
    return PhasePlan(rate, phase_count, tuple(quotas), mode)


@dataclass
class EngineState:
    """Everything needed to resume a run: selections, scores, and blinding."""

    plan: PhasePlan
    config: dict
    phase_index: int = -1
    status: str = READY_TO_SELECT
    selected: list[tuple[int, str]] = field(default_factory=list)
    pending: list[str] = field(default_factory=list)
    annotations: dict[str, dict[str, dict[str, float]]] = field(default_factory=dict)
    model: dict | None = None
    blinding: dict[str, dict[str, str]] = field(default_factory=dict)

    @property
    def selected_ids(self) -> list[str]:
        return [sid for _, sid in self.selected]

    def phase_ids(self, phase: int) -> list[str]:
        return [sid for p, sid in self.selected if p == phase]

    def to_dict(self) -> dict:
        return {
            "version": STATE_VERSION,
            "plan": {
                "rate": self.plan.rate,
                "phase_count": self.plan.phase_count,
                "quotas": list(self.plan.quotas),
                "mode": self.plan.mode,
            },
            "config": self.config,
            "phase_index": self.phase_index,
            "status": self.status,
            "selected": [[p, sid] for p, sid in self.selected],
            "pending": list(self.pending),
            "annotations": self.annotations,
            "model": self.model,
            "blinding": self.blinding,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "EngineState":
        version = payload.get("version")
        if version != STATE_VERSION:
            raise EngineError(
                f"unsupported state version {version!r} (expected {STATE_VERSION})"
            )
        plan = payload["plan"]
        return cls(
            plan=PhasePlan(
                rate=float(plan["rate"]),
                phase_count=int(plan["phase_count"]),
                quotas=tuple(int(q) for q in plan["quotas"]),
                mode=str(plan["mode"]),
            ),
            config=payload["config"],
            phase_index=int(payload["phase_index"]),
            status=str(payload["status"]),
            selected=[(int(p), str(sid)) for p, sid in payload["selected"]],
            pending=[str(sid) for sid in payload["pending"]],
            annotations=payload["annotations"],
            model=payload.get("model"),
            blinding=payload.get("blinding", {}),
        )


def save_state(state: EngineState, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(state.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
    )


def load_state(path: str | Path) -> EngineState:
    path = Path(path)
    if not path.exists():
        raise EngineError(f"state file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise EngineError(f"corrupt state file {path}: {exc.msg}") from exc
    return EngineState.from_dict(payload)


class EngineContext:
    """Per-run caches: metric matrix, similarity index, controller config."""

    def __init__(self, dataset: Dataset, config: RunConfig):
        self.dataset = dataset
        self.config = config
        self.matrix: MetricMatrix = build_metric_matrix(dataset, config.metric_set)
        self.similarity = SimilarityIndex(dataset)
        self.controller = ControllerConfig(tau=config.tau)
        self.preliminary_metric = config.resolve_preliminary_metric()

    def features_for(self, sample_ids: Sequence[str]):
        index = self.dataset.sample_index
        return [(sid, self.matrix.sample_row(index[sid])) for sid in sample_ids]


def initialize_state(dataset: Dataset, config: RunConfig) -> EngineState:
    plan = plan_phases(
        dataset.n_samples,
        config.rate,
        config.phase_count,
        config.mode,
        config.preliminary_ratio,
    )
    if config.oracle == "simulated" and not dataset.has_complete_human_scores():
        raise EngineError("simulated oracle requires complete human scores")
    return EngineState(plan=plan, config=config.to_dict())


def _blinding_for_phase(config: RunConfig, systems: Sequence[str], phase: int) -> dict[str, str]:
    rng = random.Random(config.seed * 1_000_003 + phase)
    shuffled = list(systems)
    rng.shuffle(shuffled)
    return {f"System {i + 1}": sys_id for i, sys_id in enumerate(shuffled)}


def _missing_cells(state: EngineState, dataset: Dataset) -> list[str]:
    missing = []
    for sid in state.pending:
        per_system = state.annotations.get(sid, {})
        for sys_id in dataset.systems:
            aspects = per_system.get(sys_id, {})
            if any(a not in aspects for a in dataset.aspects):
                missing.append(sid)
                break
    return missing


def _refresh_status(state: EngineState, dataset: Dataset) -> None:
    if _missing_cells(state, dataset):
        state.status = AWAITING_ANNOTATION
    elif state.phase_index >= state.plan.phase_count - 1:
        state.status = COMPLETE
    else:
        state.status = READY_TO_SELECT


def _apply_simulated_oracle(state: EngineState, dataset: Dataset) -> None:
    for sid in state.pending:
        scores = dataset.samples_by_id[sid].human_scores
        if scores is None:
            raise EngineError(f"simulated oracle: sample {sid!r} has no human scores")
        state.annotations[sid] = {
            sys_id: dict(per_aspect) for sys_id, per_aspect in scores.items()
        }


def _record_selection(
    state: EngineState, dataset: Dataset, config: RunConfig, phase: int, ids: Sequence[str]
) -> None:
    state.phase_index = phase
    state.selected.extend((phase, sid) for sid in ids)
    state.pending = list(ids)
    state.blinding[str(phase)] = _blinding_for_phase(config, dataset.systems, phase)
    state.status = AWAITING_ANNOTATION
    if config.oracle == "simulated":
        _apply_simulated_oracle(state, dataset)
    _refresh_status(state, dataset)


def run_preliminary(
    state: EngineState, dataset: Dataset, ctx: EngineContext | None = None
) -> EngineState:
    """Phase 0: rank by the preliminary metric and select the first batch."""
    if state.phase_index != -1:
        raise EngineError("preliminary phase already ran")
    if state.status != READY_TO_SELECT:
        raise EngineError(f"cannot select while {state.status}")
    config = RunConfig.from_dict(state.config)
    ctx = ctx or EngineContext(dataset, config)
    ranking = preliminary_quality(
        ctx.matrix, ctx.preliminary_metric, [s.sample_id for s in dataset.samples]
    )
    buckets = make_buckets(ranking, state.plan.quotas[0])
    ids = select_phase(buckets, [], dataset.samples_by_id, ctx.controller, ctx.similarity)
    _record_selection(state, dataset, config, 0, ids)
    return state


def run_batch_phase(
    state: EngineState, dataset: Dataset, ctx: EngineContext | None = None
) -> EngineState:
    """Retrain on the annotated pool, re-rank the remainder, select the next batch."""
    if state.status == AWAITING_ANNOTATION:
        raise EngineError("cannot select while annotations are missing")
    if state.status == COMPLETE or state.phase_index >= state.plan.phase_count - 1:
        raise EngineError("all phases already ran")
    if state.phase_index < 0:
        raise EngineError("run the preliminary phase first")
    config = RunConfig.from_dict(state.config)
    ctx = ctx or EngineContext(dataset, config)

    annotated = [(sid, state.annotations[sid]) for sid in state.selected_ids]
    targets = build_targets(annotated, dataset.aspects, dataset.systems)
    feature_rows = ctx.features_for([sid for sid, _ in annotated])
    model = fit_gbdt(
        [vec for _, vec in feature_rows],
        [targets[sid] for sid, _ in annotated],
        config.gbdt,
    )
    state.model = model.to_dict()

    chosen = set(state.selected_ids)
    remaining = [s.sample_id for s in dataset.samples if s.sample_id not in chosen]
    if not remaining:
        raise EngineError("sample pool exhausted")
    ranking = predict_quality(model, ctx.features_for(remaining))

    phase = state.phase_index + 1
    buckets = make_buckets(ranking, state.plan.quotas[phase])
    prior = [dataset.samples_by_id[sid] for sid in state.selected_ids]
    ids = select_phase(buckets, prior, dataset.samples_by_id, ctx.controller, ctx.similarity)
    _record_selection(state, dataset, config, phase, ids)
    return state


def advance(
    state: EngineState, dataset: Dataset, ctx: EngineContext | None = None
) -> EngineState:
    """Run whichever selection phase is due next."""
    if state.phase_index == -1:
        return run_preliminary(state, dataset, ctx)
    return run_batch_phase(state, dataset, ctx)


def ingest_annotations(
    state: EngineState, dataset: Dataset, entries: Sequence[Mapping]
) -> EngineState:
    """Merge human scores for the current phase's samples.

    Each entry carries sample_id, a blinded system label (or an explicit
    system_id), and per-aspect scores. Re-submitting a sample's scores is
    idempotent while its phase is still open.
    """
    if state.status == COMPLETE:
        raise EngineError("run is complete; no annotations are pending")
    pending = set(state.pending)
    label_map = state.blinding.get(str(state.phase_index), {})
    for entry in entries:
        sid = entry.get("sample_id")
        if sid not in pending:
            raise EngineError(f"sample {sid!r} is not pending annotation")
        if "blinded_label" in entry:
            label = entry["blinded_label"]
            if label not in label_map:
                raise EngineError(f"unknown blinded label {label!r}")
            sys_id = label_map[label]
        else:
            sys_id = entry.get("system_id")
            if sys_id not in dataset.systems:
                raise EngineError(f"unknown system {sys_id!r}")
        scores = entry.get("scores", {})
        for aspect, value in scores.items():
            if aspect not in dataset.aspects:
                raise EngineError(f"unknown aspect {aspect!r}")
            value = float(value)
            if not math.isfinite(value):
                raise EngineError(
                    f"non-finite score for ({sid}, {sys_id}, {aspect})"
                )
            state.annotations.setdefault(sid, {}).setdefault(sys_id, {})[aspect] = value
    _refresh_status(state, dataset)
    return state


def pending_batch(state: EngineState, dataset: Dataset) -> list[dict]:
    """Blinded view of the current phase's samples, ready for annotators."""
    label_map = state.blinding.get(str(state.phase_index), {})
    batch = []
    for sid in state.pending:
        sample = dataset.samples_by_id[sid]
        batch.append(
            {
                "sample_id": sid,
                "source": sample.source,
                "references": list(sample.references),
                "outputs": {label: sample.outputs[sys] for label, sys in label_map.items()},
            }
        )
    return batch


@dataclass(frozen=True)
class SelectionResult:
    phases: tuple[tuple[str, ...], ...]
    subset: tuple[str, ...]
    models: tuple[dict, ...]

    def to_dict(self) -> dict:
        return {
            "phases": [list(p) for p in self.phases],
            "subset": list(self.subset),
            "models": list(self.models),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def selection_result(state: EngineState) -> SelectionResult:
    phases = tuple(
        tuple(state.phase_ids(p)) for p in range(state.phase_index + 1)
    )
    models = tuple([state.model] if state.model is not None else [])
    return SelectionResult(phases, tuple(state.selected_ids), models)


def run_simulation(dataset: Dataset, config: RunConfig) -> SelectionResult:
    """End-to-end run against the stored human scores."""
    if config.oracle != "simulated":
        config = config.with_overrides(oracle="simulated")
    state = initialize_state(dataset, config)
    ctx = EngineContext(dataset, config)
    models: list[dict] = []
    run_preliminary(state, dataset, ctx)
    while state.status == READY_TO_SELECT:
        run_batch_phase(state, dataset, ctx)
        assert state.model is not None
        models.append(state.model)
    if state.status != COMPLETE:
        raise EngineError(f"simulation stalled in status {state.status}")
    phases = tuple(
        tuple(state.phase_ids(p)) for p in range(state.plan.phase_count)
    )
    return SelectionResult(phases, tuple(state.selected_ids), tuple(models))
