from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from casf.learner import (
    GbdtModel,
    GbdtParams,
    LearnerError,
    QualityRanking,
    build_features,
    build_targets,
    fit_gbdt,
    predict_quality,
    preliminary_quality,
)
from casf.metrics import MetricMatrix


def r_squared(y_true, y_pred):
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    ss_res = float(np.sum((y_true - y_pred) ** 2))
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    return 1.0 - ss_res / ss_tot


class TestBuildFeatures:
    def test_flattening_order_is_system_major(self):
        scores = np.array([[[0.1, 0.2], [0.3, 0.4]]])
        mm = MetricMatrix(("m1", "m2"), scores)
        assert build_features(mm, 0).tolist() == [0.1, 0.2, 0.3, 0.4]

    def test_single_cell(self):
        mm = MetricMatrix(("m",), np.array([[[0.7]]]))
        assert build_features(mm, 0).tolist() == [0.7]

    def test_purity(self):
        mm = MetricMatrix(("m",), np.random.default_rng(0).uniform(size=(3, 2, 1)))
        assert np.array_equal(build_features(mm, 1), build_features(mm, 1))


class TestBuildTargets:
    def test_two_sample_zscore_example(self):
        annotated = [
            ("s1", {"a": {"q": 1.0}, "b": {"q": 3.0}}),
            ("s2", {"a": {"q": 3.0}, "b": {"q": 1.0}}),
        ]
        targets = build_targets(annotated, ["q"], ["a", "b"])
        assert targets == {"s1": pytest.approx(0.0), "s2": pytest.approx(0.0)}

    def test_constant_aspect_contributes_zero(self):
        annotated = [
            ("s1", {"a": {"q": 1.0, "c": 5.0}, "b": {"q": 3.0, "c": 5.0}}),
            ("s2", {"a": {"q": 3.0, "c": 5.0}, "b": {"q": 1.0, "c": 5.0}}),
        ]
        with_const = build_targets(annotated, ["q", "c"], ["a", "b"])
        only_q = build_targets(annotated, ["q"], ["a", "b"])
        assert with_const == only_q

    def test_single_sample_all_zero(self):
        annotated = [("s1", {"a": {"q": 2.0}, "b": {"q": 2.0}})]
        assert build_targets(annotated, ["q"], ["a", "b"]) == {"s1": 0.0}

    def test_incomplete_annotation_rejected(self):
        annotated = [("s1", {"a": {"q": 2.0}})]
        with pytest.raises(LearnerError, match="s1"):
            build_targets(annotated, ["q"], ["a", "b"])


class TestFitGbdt:
    def test_constant_targets_exact(self):
        x = np.arange(20, dtype=float).reshape(-1, 1)
        model = fit_gbdt(x, np.full(20, 3.25))
        assert np.allclose(model.predict(x), 3.25, atol=0)

    def test_linear_relation_high_r2(self):
        x = np.arange(100, dtype=float).reshape(-1, 1)
        y = 2.0 * x[:, 0]
        model = fit_gbdt(x, y, GbdtParams(100, 3, 0.1, 1))
        assert r_squared(y, model.predict(x)) >= 0.99

    def test_training_mse_non_increasing(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(size=(60, 4))
        y = x[:, 0] * 2 + rng.normal(0, 0.1, 60)
        model = fit_gbdt(x, y, GbdtParams(50, 2, 0.2, 1))
        path = model.train_mse
        assert all(b <= a + 1e-12 for a, b in zip(path, path[1:]))

    def test_empty_training_set_rejected(self):
        with pytest.raises(LearnerError):
            fit_gbdt(np.empty((0, 2)), [])

    def test_determinism(self):
        rng = np.random.default_rng(5)
        x = rng.uniform(size=(40, 3))
        y = rng.normal(size=40)
        m1 = fit_gbdt(x, y, GbdtParams(30, 3, 0.1, 1))
        m2 = fit_gbdt(x, y, GbdtParams(30, 3, 0.1, 1))
        assert json.dumps(m1.to_dict(), sort_keys=True) == json.dumps(
            m2.to_dict(), sort_keys=True
        )

    def test_stump_threshold_between_adjacent_values(self):
        rng = np.random.default_rng(9)
        x = np.sort(rng.uniform(size=25)).reshape(-1, 1)
        y = rng.normal(size=25)
        model = fit_gbdt(x, y, GbdtParams(10, 1, 0.5, 1))
        values = x[:, 0]
        for tree in model.trees:
            if tree.is_leaf:
                continue
            t = tree.threshold
            below = values[values <= t]
            above = values[values > t]
            assert below.size and above.size
            assert below.max() <= t < above.min()

    def test_serialization_roundtrip(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(size=(30, 2))
        y = rng.normal(size=30)
        model = fit_gbdt(x, y, GbdtParams(10, 3, 0.1, 1))
        restored = GbdtModel.from_dict(json.loads(json.dumps(model.to_dict())))
        assert np.allclose(model.predict(x), restored.predict(x), atol=0)


class TestPredictQuality:
    def test_descending_rank_order(self):
        x = np.array([[0.0], [1.0]])
        model = fit_gbdt(x, [0.1, 0.9], GbdtParams(50, 1, 0.5, 1))
        ranking = predict_quality(model, [("low", x[0]), ("high", x[1])])
        assert ranking.ranks["high"] == 0
        assert ranking.ranks["low"] == 1

    def test_tie_break_by_sample_id(self):
        model = GbdtModel(0.5, 0.1, [], 1)
        ranking = predict_quality(model, [("b", np.zeros(1)), ("a", np.zeros(1))])
        assert ranking.ranks["a"] == 0
        assert ranking.ranks["b"] == 1

    def test_permutation_invariance(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(size=(8, 2))
        model = fit_gbdt(x, rng.normal(size=8), GbdtParams(20, 2, 0.1, 1))
        rows = [(f"s{i}", x[i]) for i in range(8)]
        forward = predict_quality(model, rows)
        backward = predict_quality(model, rows[::-1])
        assert forward.ranks == backward.ranks

    def test_width_mismatch_rejected(self):
        model = GbdtModel(0.0, 0.1, [], 3)
        with pytest.raises(LearnerError, match="width"):
            model.predict(np.zeros((2, 2)))


class TestPreliminaryQuality:
    def test_mean_over_systems(self):
        mm = MetricMatrix(("m",), np.array([[[0.2], [0.4]]]))
        ranking = preliminary_quality(mm, "m", ["s0"])
        assert ranking.scores["s0"] == pytest.approx(0.3)

    def test_identical_scores_follow_id_order(self):
        mm = MetricMatrix(("m",), np.full((3, 2, 1), 0.5))
        ranking = preliminary_quality(mm, "m", ["c", "a", "b"])
        assert ranking.order == ["a", "b", "c"]

    def test_three_sample_ordering(self):
        scores = np.array([[[0.5], [0.5]], [[0.9], [0.9]], [[0.1], [0.1]]])
        mm = MetricMatrix(("m",), scores)
        ranking = preliminary_quality(mm, "m", ["s0", "s1", "s2"])
        assert [ranking.ranks[s] for s in ("s0", "s1", "s2")] == [1, 0, 2]


@settings(max_examples=40, deadline=None)
@given(
    st.dictionaries(
        st.text(alphabet="abcdef", min_size=1, max_size=4),
        st.floats(-10, 10, allow_nan=False),
        min_size=1,
        max_size=8,
    )
)
def test_ranking_is_permutation(scores):
    ranking = QualityRanking.from_scores(scores)
    assert sorted(ranking.ranks.values()) == list(range(len(scores)))
