"""casf: constrained active sampling of evaluation subsets for human judgment."""

from .config import RunConfig
from .controller import ControllerConfig, redundancy_violation, select_phase
from .dataset import Dataset, Sample, ValidationReport, load_dataset, validate
from .engine import (
    EngineState,
    PhasePlan,
    SelectionResult,
    ingest_annotations,
    plan_phases,
    run_simulation,
)
from .evaluation import (
    RankingReport,
    build_report,
    heuristic_baseline,
    kendall_tau_b,
    random_baseline,
    significance_retention,
    system_means,
    top_ranked_hit,
    wilcoxon_signed_rank,
)
from .learner import GbdtModel, GbdtParams, QualityRanking, fit_gbdt, predict_quality
from .metrics import MetricMatrix, MetricSpec, bigram_dice, bleu, build_metric_matrix, rouge_l, rouge_n
from .sampler import Bucket, make_buckets

__version__ = "0.1.0"

__all__ = [
    "Bucket",
    "ControllerConfig",
    "Dataset",
    "EngineState",
    "GbdtModel",
    "GbdtParams",
    "MetricMatrix",
    "MetricSpec",
    "PhasePlan",
    "QualityRanking",
    "RankingReport",
    "RunConfig",
    "Sample",
    "SelectionResult",
    "ValidationReport",
    "bigram_dice",
    "bleu",
    "build_metric_matrix",
    "build_report",
    "fit_gbdt",
    "heuristic_baseline",
    "ingest_annotations",
    "kendall_tau_b",
    "load_dataset",
    "make_buckets",
    "plan_phases",
    "predict_quality",
    "random_baseline",
    "redundancy_violation",
    "rouge_l",
    "rouge_n",
    "run_simulation",
    "select_phase",
    "significance_retention",
    "system_means",
    "top_ranked_hit",
    "validate",
    "wilcoxon_signed_rank",
]
