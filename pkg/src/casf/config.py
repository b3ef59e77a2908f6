"""Run configuration shared by the CLI, the engine, and the service."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Sequence

from .learner import GbdtParams
from .metrics import DEFAULT_METRIC_SET, MetricSpec


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    dataset_path: str = ""
    sidecar_path: str | None = None
    metric_set: tuple[MetricSpec, ...] = DEFAULT_METRIC_SET
    preliminary_metric: str | None = None  # default: mover_score if present, else rouge_l
    rate: float = 0.5
    phase_count: int = 5
    mode: str = "average"  # "average" | "preliminary_fixed"
    preliminary_ratio: float | None = None  # only for preliminary_fixed mode
    tau: float = 0.5
    seeds: tuple[int, ...] = (1, 2, 3)
    oracle: str = "simulated"  # "simulated" | "live"
    gbdt: GbdtParams = field(default_factory=GbdtParams)
    seed: int = 0  # drives blinded-label shuffling
    aspects: tuple[str, ...] | None = None  # override for not-yet-annotated datasets
    output_dir: str = "casf_out"
    port: int = 8765
    scale_min: int = 1
    scale_max: int = 5

    def __post_init__(self) -> None:
        if not 0.0 < self.rate <= 1.0:
            raise ConfigError(f"sampling rate must be in (0, 1], got {self.rate}")
        if self.phase_count < 1:
            raise ConfigError("phase_count must be at least 1")
        if self.mode not in ("average", "preliminary_fixed"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode == "preliminary_fixed" and self.preliminary_ratio is None:
            raise ConfigError("preliminary_fixed mode requires preliminary_ratio")
        if self.oracle not in ("simulated", "live"):
            raise ConfigError(f"unknown oracle {self.oracle!r}")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError(f"tau must be in [0, 1], got {self.tau}")
        if self.scale_min >= self.scale_max:
            raise ConfigError("scale_min must be below scale_max")

    def resolve_preliminary_metric(self) -> str:
        names = [m.name for m in self.metric_set]
        if self.preliminary_metric is not None:
            if self.preliminary_metric not in names:
                raise ConfigError(
                    f"preliminary metric {self.preliminary_metric!r} not in metric set {names}"
                )
            return self.preliminary_metric
        if "mover_score" in names:
            return "mover_score"
        if "rouge_l" in names:
            return "rouge_l"
        raise ConfigError(
            "no preliminary metric: set one explicitly or include rouge_l/mover_score"
        )

    def with_overrides(self, **kwargs) -> "RunConfig":
        return replace(self, **kwargs)

    def to_dict(self) -> dict:
        return {
            "dataset_path": self.dataset_path,
            "sidecar_path": self.sidecar_path,
            "metric_set": [{"name": m.name, "kind": m.kind} for m in self.metric_set],
            "preliminary_metric": self.preliminary_metric,
            "rate": self.rate,
            "phase_count": self.phase_count,
            "mode": self.mode,
            "preliminary_ratio": self.preliminary_ratio,
            "tau": self.tau,
            "seeds": list(self.seeds),
            "oracle": self.oracle,
            "gbdt": {
                "n_trees": self.gbdt.n_trees,
                "max_depth": self.gbdt.max_depth,
                "learning_rate": self.gbdt.learning_rate,
                "min_samples_leaf": self.gbdt.min_samples_leaf,
            },
            "seed": self.seed,
            "aspects": list(self.aspects) if self.aspects is not None else None,
            "output_dir": self.output_dir,
            "port": self.port,
            "scale_min": self.scale_min,
            "scale_max": self.scale_max,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RunConfig":
        gbdt = payload.get("gbdt", {})
        return cls(
            dataset_path=payload.get("dataset_path", ""),
            sidecar_path=payload.get("sidecar_path"),
            metric_set=tuple(
                MetricSpec(m["name"], m["kind"]) for m in payload.get("metric_set", [])
            )
            or DEFAULT_METRIC_SET,
            preliminary_metric=payload.get("preliminary_metric"),
            rate=payload.get("rate", 0.5),
            phase_count=payload.get("phase_count", 5),
            mode=payload.get("mode", "average"),
            preliminary_ratio=payload.get("preliminary_ratio"),
            tau=payload.get("tau", 0.5),
            seeds=tuple(payload.get("seeds", (1, 2, 3))),
            oracle=payload.get("oracle", "simulated"),
            gbdt=GbdtParams(
                n_trees=gbdt.get("n_trees", 100),
                max_depth=gbdt.get("max_depth", 3),
                learning_rate=gbdt.get("learning_rate", 0.1),
                min_samples_leaf=gbdt.get("min_samples_leaf", 1),
            ),
            seed=payload.get("seed", 0),
            aspects=tuple(payload["aspects"]) if payload.get("aspects") else None,
            output_dir=payload.get("output_dir", "casf_out"),
            port=payload.get("port", 8765),
            scale_min=payload.get("scale_min", 1),
            scale_max=payload.get("scale_max", 5),
        )

    def digest(self) -> str:
        payload = self.to_dict()
        for volatile in ("output_dir", "port"):  # no effect on results
            payload.pop(volatile, None)
        canonical = json.dumps(payload, sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def parse_metric_names(names: Sequence[str]) -> tuple[MetricSpec, ...]:
    return tuple(MetricSpec.parse(n) for n in names)
