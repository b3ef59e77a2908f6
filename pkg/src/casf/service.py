"""REST annotation service for live sampling sessions.

Single exclusive writer: every mutating request takes the process lock,
persists the updated state, and only then acknowledges. Annotators only ever
see blinded system labels.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .config import RunConfig
from .dataset import Dataset, load_dataset
from .engine import (
    COMPLETE,
    READY_TO_SELECT,
    EngineError,
    EngineState,
    _missing_cells,
    advance,
    ingest_annotations,
    load_state,
    pending_batch,
    save_state,
    selection_result,
)
from .evaluation import build_report


class ScoreEntry(BaseModel):
    sample_id: str
    blinded_label: str
    scores: dict[str, float] = Field(default_factory=dict)


class ScoreBatch(BaseModel):
    entries: list[ScoreEntry]


def create_app(state_path: str | Path, ui_dir: str | Path | None = None) -> FastAPI:
    state_path = Path(state_path)
    state = load_state(state_path)
    config = RunConfig.from_dict(state.config)
    dataset: Dataset = load_dataset(
        config.dataset_path, sidecar=config.sidecar_path, aspects=config.aspects
    )
    lock = threading.Lock()
    app = FastAPI(title="casf annotation service")

    def session_payload(st: EngineState) -> dict:
        missing = _missing_cells(st, dataset)
        return {
            "phase": st.phase_index,
            "phase_count": st.plan.phase_count,
            "status": st.status,
            "pending": len(missing),
            "pending_total": len(st.pending),
            "selected_total": len(st.selected),
            "budget": st.plan.total,
            "aspects": list(dataset.aspects),
            "scale": {"min": config.scale_min, "max": config.scale_max},
        }

    @app.get("/api/session")
    def get_session() -> dict:
        with lock:
            return session_payload(state)

    @app.get("/api/batch")
    def get_batch() -> dict:
        with lock:
            scored = {
                sid for sid in state.pending if sid not in _missing_cells(state, dataset)
            }
            items = pending_batch(state, dataset)
            for item in items:
                item["scored"] = item["sample_id"] in scored
            return {
                "phase": state.phase_index,
                "items": items,
                "aspects": list(dataset.aspects),
                "scale": {"min": config.scale_min, "max": config.scale_max},
            }

    @app.post("/api/scores")
    def post_scores(batch: ScoreBatch) -> dict:
        with lock:
            for entry in batch.entries:
                value_min, value_max = config.scale_min, config.scale_max
                for aspect, value in entry.scores.items():
                    if not value_min <= value <= value_max:
                        raise HTTPException(
                            status_code=400,
                            detail=f"score {value} for ({entry.sample_id}, {aspect}) "
                            f"outside [{value_min}, {value_max}]",
                        )
            try:
                ingest_annotations(
                    state, dataset, [e.model_dump() for e in batch.entries]
                )
            except EngineError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            save_state(state, state_path)
            return session_payload(state)

    @app.post("/api/phase/advance")
    def post_advance() -> dict:
        with lock:
            if state.status == COMPLETE:
                raise HTTPException(status_code=409, detail="run already complete")
            if state.status != READY_TO_SELECT:
                raise HTTPException(
                    status_code=409,
                    detail=f"cannot advance while {state.status}",
                )
            advance(state, dataset)
            save_state(state, state_path)
            payload = session_payload(state)
            if state.status == COMPLETE:
                payload["subset"] = state.selected_ids
            return payload

    @app.get("/api/report")
    def get_report() -> dict:
        with lock:
            if state.status != COMPLETE:
                raise HTTPException(
                    status_code=409, detail=f"run not complete (status {state.status})"
                )
            result = selection_result(state)
            payload: dict = {"selection": result.to_dict()}
            if dataset.has_complete_human_scores():
                report = build_report(
                    dataset,
                    {"CASF": state.selected_ids},
                    dataset_name=Path(config.dataset_path).name,
                    config_digest=config.digest(),
                )
                payload["report"] = report.to_dict()
            return json.loads(json.dumps(payload))

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=Path(ui_dir), html=True), name="ui")

    return app
