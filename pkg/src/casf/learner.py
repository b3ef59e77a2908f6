"""Per-sample quality prediction with gradient-boosted regression trees.

The booster is least-squares boosting written out in full: exact greedy
variance-reduction splits, no row or feature subsampling, split ties broken
by lowest feature index then lowest threshold. Repeated fits on identical
inputs produce identical models, which keeps the whole sampling pipeline
replayable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .metrics import MetricMatrix


class LearnerError(ValueError):
    pass


@dataclass(frozen=True)
class GbdtParams:
    n_trees: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 1


@dataclass
class TreeNode:
    """Binary regression tree node; a leaf when left/right are None."""

    value: float = 0.0
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"leaf": self.value}
        assert self.left is not None and self.right is not None
        return {
            "split": [self.feature, self.threshold],
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "TreeNode":
        if "leaf" in payload:
            return cls(value=float(payload["leaf"]))
        feature, threshold = payload["split"]
        return cls(
            feature=int(feature),
            threshold=float(threshold),
            left=cls.from_dict(payload["left"]),
            right=cls.from_dict(payload["right"]),
        )


def _tree_predict(root: TreeNode, x: np.ndarray) -> np.ndarray:
    out = np.empty(x.shape[0], dtype=np.float64)
    stack = [(root, np.arange(x.shape[0]))]
    while stack:
        node, idx = stack.pop()
        if idx.size == 0:
            continue
        if node.is_leaf:
            out[idx] = node.value
        else:
            assert node.left is not None and node.right is not None
            mask = x[idx, node.feature] <= node.threshold
            stack.append((node.left, idx[mask]))
            stack.append((node.right, idx[~mask]))
    return out


def _best_split(
    x: np.ndarray, y: np.ndarray, min_leaf: int
) -> tuple[float, int, float] | None:
    """Return (sse, feature, threshold) of the best split, or None.

    Candidate thresholds are midpoints between consecutive distinct sorted
    feature values. The first strictly better candidate wins, so equal-loss
    ties resolve to the lowest feature index, then the lowest threshold.
    """
    n = y.shape[0]
    if n < 2 * min_leaf:
        return None
    best: tuple[float, int, float] | None = None
    for f in range(x.shape[1]):
        order = np.argsort(x[:, f], kind="stable")
        xs = x[order, f]
        ys = y[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        left_n = np.arange(1, n, dtype=np.float64)
        valid = xs[1:] > xs[:-1]
        valid &= (left_n >= min_leaf) & (n - left_n >= min_leaf)
        if not valid.any():
            continue
        left_sse = csq[:-1] - csum[:-1] ** 2 / left_n
        right_sse = (csq[-1] - csq[:-1]) - (csum[-1] - csum[:-1]) ** 2 / (n - left_n)
        sse = np.where(valid, left_sse + right_sse, np.inf)
        i = int(np.argmin(sse))
        if best is None or sse[i] < best[0]:
            threshold = xs[i] + (xs[i + 1] - xs[i]) / 2.0
            if threshold >= xs[i + 1]:  # rounding guard: keep the partition real
                threshold = xs[i]
            best = (float(sse[i]), f, float(threshold))
    return best


def _grow(x: np.ndarray, y: np.ndarray, depth: int, params: GbdtParams) -> TreeNode:
    node = TreeNode(value=float(np.mean(y)))
    if depth >= params.max_depth or y.shape[0] < 2 or np.all(y == y[0]):
        return node
    split = _best_split(x, y, params.min_samples_leaf)
    if split is None:
        return node
    _, feature, threshold = split
    mask = x[:, feature] <= threshold
    node.feature = feature
    node.threshold = threshold
    node.left = _grow(x[mask], y[mask], depth + 1, params)
    node.right = _grow(x[~mask], y[~mask], depth + 1, params)
    return node


@dataclass
class GbdtModel:
    initial_estimate: float
    learning_rate: float
    trees: list[TreeNode]
    n_features: int
    train_mse: tuple[float, ...] = field(default_factory=tuple)

    def predict(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(1, -1)
        if x.shape[1] != self.n_features:
            raise LearnerError(
                f"feature width {x.shape[1]} does not match model width {self.n_features}"
            )
        out = np.full(x.shape[0], self.initial_estimate, dtype=np.float64)
        for tree in self.trees:
            out += self.learning_rate * _tree_predict(tree, x)
        return out

    def to_dict(self) -> dict:
        return {
            "initial_estimate": self.initial_estimate,
            "learning_rate": self.learning_rate,
            "n_features": self.n_features,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "GbdtModel":
        return cls(
            initial_estimate=float(payload["initial_estimate"]),
            learning_rate=float(payload["learning_rate"]),
            trees=[TreeNode.from_dict(t) for t in payload["trees"]],
            n_features=int(payload["n_features"]),
        )


def fit_gbdt(
    features: Sequence[Sequence[float]] | np.ndarray,
    targets: Sequence[float] | np.ndarray,
    params: GbdtParams = GbdtParams(),
) -> GbdtModel:
    """Least-squares boosting: mean start, each tree fit to current residuals."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise LearnerError("empty training set")
    if y.shape[0] != x.shape[0]:
        raise LearnerError("features and targets have different lengths")

    initial = float(np.mean(y))
    pred = np.full(y.shape[0], initial, dtype=np.float64)
    trees: list[TreeNode] = []
    mse_path: list[float] = []
    for _ in range(params.n_trees):
        residuals = y - pred
        root = _grow(x, residuals, 0, params)
        pred = pred + params.learning_rate * _tree_predict(root, x)
        trees.append(root)
        mse_path.append(float(np.mean((y - pred) ** 2)))
    return GbdtModel(initial, params.learning_rate, trees, x.shape[1], tuple(mse_path))


@dataclass(frozen=True)
class QualityRanking:
    """Predicted quality scores and the ranks they induce (rank 0 = best).

    Score ties are broken by ascending sample_id so the ranking is a pure
    function of the (sample_id, score) pairs.
    """

    scores: Mapping[str, float]
    ranks: Mapping[str, int]

    @classmethod
    def from_scores(cls, scores: Mapping[str, float]) -> "QualityRanking":
        ordered = sorted(scores, key=lambda sid: (-scores[sid], sid))
        return cls(dict(scores), {sid: rank for rank, sid in enumerate(ordered)})

    @property
    def order(self) -> list[str]:
        return sorted(self.ranks, key=self.ranks.__getitem__)

    def __len__(self) -> int:
        return len(self.ranks)


def build_features(matrix: MetricMatrix, sample_index: int) -> np.ndarray:
    """Flattened metric row for one sample (system-major, metric-minor)."""
    return matrix.sample_row(sample_index)


def build_targets(
    annotated: Sequence[tuple[str, Mapping[str, Mapping[str, float]]]],
    aspects: Sequence[str],
    systems: Sequence[str],
) -> dict[str, float]:
    """Regression targets from the annotated pool.

    Scores are z-scored per aspect over every (sample, system) pair currently
    annotated (population standard deviation); the target for a sample is the
    sum of its standardized scores over all systems and aspects. Aspects with
    zero variance contribute 0 everywhere.
    """
    if not annotated:
        raise LearnerError("no annotated samples to build targets from")
    for sid, per_system in annotated:
        for sys_id in systems:
            if sys_id not in per_system:
                raise LearnerError(f"sample {sid!r}: missing scores for system {sys_id!r}")
            missing = [a for a in aspects if a not in per_system[sys_id]]
            if missing:
                raise LearnerError(
                    f"sample {sid!r}: missing aspects {missing} for system {sys_id!r}"
                )

    targets = {sid: 0.0 for sid, _ in annotated}
    for aspect in aspects:
        values = np.array(
            [[per[sys_id][aspect] for sys_id in systems] for _, per in annotated],
            dtype=np.float64,
        )
        mean = float(values.mean())
        std = float(values.std())
        if std == 0.0:
            continue
        z = (values - mean) / std
        for row, (sid, _) in enumerate(annotated):
            targets[sid] += float(z[row].sum())
    return targets


def predict_quality(
    model: GbdtModel, features: Sequence[tuple[str, np.ndarray]]
) -> QualityRanking:
    """Score samples with a fitted booster and rank them best-first."""
    if not features:
        raise LearnerError("no samples to score")
    ids = [sid for sid, _ in features]
    x = np.stack([vec for _, vec in features])
    scores = model.predict(x)
    return QualityRanking.from_scores({sid: float(s) for sid, s in zip(ids, scores)})


def preliminary_quality(
    matrix: MetricMatrix, metric: str, sample_ids: Sequence[str]
) -> QualityRanking:
    """Bootstrap ranking before any annotation exists: one metric, averaged
    over systems."""
    m = matrix.metric_index(metric)
    if len(sample_ids) != matrix.scores.shape[0]:
        raise LearnerError("sample_ids must cover every matrix row")
    means = matrix.scores[:, :, m].mean(axis=1)
    return QualityRanking.from_scores(
        {sid: float(v) for sid, v in zip(sample_ids, means)}
    )
