"""Command line entry points.

Subcommands: simulate (offline end-to-end comparison run), phase-init /
phase-next / ingest (live annotation workflow over a persisted state file),
report (tables for a finished run), serve (REST service for the browser UI).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, parse_metric_names
from .dataset import Dataset, DatasetError, load_dataset, validate
from .engine import (
    COMPLETE,
    READY_TO_SELECT,
    EngineError,
    EngineState,
    advance,
    ingest_annotations,
    initialize_state,
    load_state,
    pending_batch,
    save_state,
    selection_result,
)
from .evaluation import (
    EvaluationError,
    build_report,
    heuristic_baseline,
    metric_average_subset,
    online_subset,
    preliminary_metric_subset,
    random_subset,
)
from .learner import LearnerError
from .metrics import MetricError, build_metric_matrix
from .sampler import SamplerError

CasfError = (
    ConfigError,
    DatasetError,
    EngineError,
    EvaluationError,
    LearnerError,
    MetricError,
    SamplerError,
)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", required=True, help="dataset JSONL path")
    parser.add_argument("--sidecar", help="external metric sidecar JSON")
    parser.add_argument("--rate", type=float, default=0.5, help="sampling rate r")
    parser.add_argument("--phases", type=int, default=5, help="total phase count")
    parser.add_argument(
        "--mode", choices=["average", "preliminary-fixed"], default="average"
    )
    parser.add_argument(
        "--preliminary-ratio", type=float, help="phase-0 ratio for preliminary-fixed mode"
    )
    parser.add_argument("--tau", type=float, default=0.5, help="redundancy threshold")
    parser.add_argument(
        "--metrics",
        default="rouge_1,rouge_2,rouge_l,bleu",
        help="comma-separated metric names; unknown names are external",
    )
    parser.add_argument("--preliminary-metric", help="metric for the phase-0 ranking")
    parser.add_argument("--seed", type=int, default=0, help="blinding seed")
    parser.add_argument(
        "--aspects", help="comma-separated aspect names for unannotated datasets"
    )
    parser.add_argument("--trees", type=int, default=100)
    parser.add_argument("--max-depth", type=int, default=3)
    parser.add_argument("--learning-rate", type=float, default=0.1)


def _config_from_args(args: argparse.Namespace, oracle: str) -> RunConfig:
    from .learner import GbdtParams

    return RunConfig(
        dataset_path=args.data,
        sidecar_path=args.sidecar,
        metric_set=parse_metric_names(
            [m.strip() for m in args.metrics.split(",") if m.strip()]
        ),
        preliminary_metric=args.preliminary_metric,
        rate=args.rate,
        phase_count=args.phases,
        mode=args.mode.replace("-", "_"),
        preliminary_ratio=args.preliminary_ratio,
        tau=args.tau,
        seeds=tuple(getattr(args, "seed_list", (1, 2, 3))),
        oracle=oracle,
        gbdt=GbdtParams(
            n_trees=args.trees,
            max_depth=args.max_depth,
            learning_rate=args.learning_rate,
        ),
        seed=args.seed,
        aspects=(
            tuple(a.strip() for a in args.aspects.split(",") if a.strip())
            if args.aspects
            else None
        ),
        output_dir=getattr(args, "out", "casf_out"),
    )


def _load_config_dataset(config: RunConfig) -> Dataset:
    dataset = load_dataset(
        config.dataset_path,
        sidecar=config.sidecar_path,
        aspects=config.aspects,
    )
    required = [m.name for m in config.metric_set if m.kind == "external"]
    report = validate(dataset, required)
    if not report.ok:
        sid, msg = report.errors[0]
        raise DatasetError(
            f"{len(report.errors)} metric cells missing; first: sample {sid!r}: {msg}"
        )
    return dataset


def _state_path(args: argparse.Namespace) -> Path:
    if getattr(args, "state", None):
        return Path(args.state)
    env = os.environ.get("CASF_STATE")
    if env:
        return Path(env)
    raise EngineError("no state path: pass --state or set CASF_STATE")


def cmd_simulate(args: argparse.Namespace) -> int:
    args.seed_list = tuple(int(s) for s in args.seeds.split(","))
    config = _config_from_args(args, oracle="simulated")
    dataset = _load_config_dataset(config)

    from .engine import run_simulation

    result = run_simulation(dataset, config)
    matrix = build_metric_matrix(dataset, config.metric_set)
    preliminary = config.resolve_preliminary_metric()

    method_subsets: dict[str, list[str]] = {}
    for i, seed in enumerate(config.seeds, 1):
        method_subsets[f"R{i}"] = random_subset(dataset, config.rate, seed)
    for i, seed in enumerate(config.seeds, 1):
        method_subsets[f"H{i}"] = heuristic_baseline(dataset, config.rate, seed)
    method_subsets["8M"] = metric_average_subset(dataset, config.rate, matrix)
    method_subsets["SM"] = preliminary_metric_subset(
        dataset, config.rate, matrix, preliminary
    )
    method_subsets["OL"] = online_subset(dataset, config)
    method_subsets["CASF"] = list(result.subset)

    mean_groups = {
        "R Mean": [f"R{i}" for i in range(1, len(config.seeds) + 1)],
        "H Mean": [f"H{i}" for i in range(1, len(config.seeds) + 1)],
    }
    report = build_report(
        dataset,
        method_subsets,
        mean_groups=mean_groups,
        dataset_name=Path(config.dataset_path).name,
        config_digest=config.digest(),
    )

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "selection.json").write_text(result.to_json(), encoding="utf-8")
    (out / "subsets.json").write_text(
        json.dumps({m: list(s) for m, s in method_subsets.items()}, indent=2, sort_keys=True),
        encoding="utf-8",
    )
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "report.md").write_text(report.to_markdown(), encoding="utf-8")
    print(f"wrote selection, subsets and report to {out}/")
    return 0


def cmd_phase_init(args: argparse.Namespace) -> int:
    config = _config_from_args(args, oracle=args.oracle)
    dataset = _load_config_dataset(config)
    state_path = _state_path(args)
    if state_path.exists() and not args.force:
        raise EngineError(f"state file {state_path} exists; use --force to overwrite")
    state = initialize_state(dataset, config)
    advance(state, dataset)
    save_state(state, state_path)
    _emit_batch(state, dataset, state_path)
    return 0


def _emit_batch(state: EngineState, dataset: Dataset, state_path: Path) -> None:
    batch_path = state_path.with_name(
        state_path.stem + f".batch_{state.phase_index}.json"
    )
    batch_path.write_text(
        json.dumps(pending_batch(state, dataset), indent=2, sort_keys=True),
        encoding="utf-8",
    )
    print(
        f"phase {state.phase_index}: {len(state.pending)} samples pending "
        f"-> {batch_path} (status {state.status})"
    )


def _reload(args: argparse.Namespace) -> tuple[EngineState, Dataset, Path]:
    state_path = _state_path(args)
    state = load_state(state_path)
    config = RunConfig.from_dict(state.config)
    dataset = _load_config_dataset(config)
    return state, dataset, state_path


def cmd_phase_next(args: argparse.Namespace) -> int:
    state, dataset, state_path = _reload(args)
    if state.status == COMPLETE:
        _write_final_subset(state, state_path)
        print("complete")
        return 0
    if state.status != READY_TO_SELECT:
        from .engine import _missing_cells

        missing = _missing_cells(state, dataset)
        print(
            f"awaiting annotation for {len(missing)} of {len(state.pending)} samples: "
            + ", ".join(missing[:10])
        )
        return 0
    advance(state, dataset)
    save_state(state, state_path)
    if state.status == COMPLETE:
        _write_final_subset(state, state_path)
        print("complete")
        return 0
    _emit_batch(state, dataset, state_path)
    return 0


def _write_final_subset(state: EngineState, state_path: Path) -> None:
    subset_path = state_path.with_name(state_path.stem + ".subset.json")
    subset_path.write_text(
        selection_result(state).to_json(), encoding="utf-8"
    )


def cmd_ingest(args: argparse.Namespace) -> int:
    state, dataset, state_path = _reload(args)
    entries = json.loads(Path(args.scores).read_text(encoding="utf-8"))
    ingest_annotations(state, dataset, entries)
    save_state(state, state_path)
    print(f"status {state.status}; phase {state.phase_index}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    state, dataset, state_path = _reload(args)
    if state.status != COMPLETE:
        raise EngineError(f"run not complete (status {state.status})")
    config = RunConfig.from_dict(state.config)
    subset = state.selected_ids
    if dataset.has_complete_human_scores():
        report = build_report(
            dataset,
            {"CASF": subset},
            dataset_name=Path(config.dataset_path).name,
            config_digest=config.digest(),
        )
        payload = report.to_json()
    else:
        payload = json.dumps(
            {"subset": subset, "note": "population scores unknown; no tau"},
            indent=2,
        )
    out = Path(args.out) if args.out else state_path.parent
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(payload, encoding="utf-8")
    print(f"wrote {out / 'report.json'}")
    return 0


def _holder_alive(lock_path: Path) -> bool:
    try:
        pid = int(lock_path.read_text().strip())
        os.kill(pid, 0)
        return True
    except (ValueError, OSError):
        return False


def _acquire_writer_lock(state_path: Path) -> Path:
    """One writer per state file, across processes.

    The lock carries the holder's pid; locks left behind by a dead process
    are reclaimed.
    """
    lock_path = state_path.with_name(state_path.name + ".lock")
    for _ in range(2):
        try:
            fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            if _holder_alive(lock_path):
                raise EngineError(
                    f"another writer holds {lock_path}; stop it or remove the lock"
                ) from None
            lock_path.unlink(missing_ok=True)
            continue
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        return lock_path
    raise EngineError(f"could not acquire writer lock {lock_path}")


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    state_path = _state_path(args)
    lock_path = _acquire_writer_lock(state_path)
    try:
        app = create_app(state_path, ui_dir=args.ui)
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    finally:
        lock_path.unlink(missing_ok=True)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="casf",
        description="Active sampling of evaluation subsets for human judgment",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="end-to-end run against stored human scores")
    _add_config_flags(p)
    p.add_argument("--seeds", default="1,2,3", help="baseline seeds, comma-separated")
    p.add_argument("--out", default="casf_out", help="output directory")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("phase-init", help="start a live annotation session")
    _add_config_flags(p)
    p.add_argument("--state", help="state file path (or env CASF_STATE)")
    p.add_argument("--oracle", choices=["live", "simulated"], default="live")
    p.add_argument("--force", action="store_true", help="overwrite an existing state")
    p.set_defaults(fn=cmd_phase_init)

    p = sub.add_parser("phase-next", help="advance to the next sampling phase")
    p.add_argument("--state", help="state file path (or env CASF_STATE)")
    p.set_defaults(fn=cmd_phase_next)

    p = sub.add_parser("ingest", help="merge an annotation score file")
    p.add_argument("--state", help="state file path (or env CASF_STATE)")
    p.add_argument("--scores", required=True, help="JSON list of score entries")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("report", help="tables for a completed run")
    p.add_argument("--state", help="state file path (or env CASF_STATE)")
    p.add_argument("--out", help="output directory (default: beside the state)")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("serve", help="REST annotation service")
    p.add_argument("--state", help="state file path (or env CASF_STATE)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--ui", help="directory with the built web client (frontend/dist)")
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CasfError as exc:
        print(f"casf: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
