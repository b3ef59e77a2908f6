from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from casf.controller import (
    ControllerConfig,
    SimilarityIndex,
    pairwise_similarity,
    rank_distance,
    redundancy_violation,
    select_from_bucket,
    select_phase,
)
from casf.dataset import Dataset, Sample
from casf.learner import QualityRanking
from casf.sampler import Bucket, make_buckets


def sample_with(sid: str, text: str, text_b: str | None = None) -> Sample:
    return Sample(
        sample_id=sid,
        source=f"src {sid}",
        outputs={"sysA": text, "sysB": text_b if text_b is not None else text + " tail"},
        human_scores={"sysA": {"q": 1.0}, "sysB": {"q": 1.0}},
    )


class TestViolation:
    def test_empty_selection_is_feasible(self):
        cand = sample_with("c", "alpha beta gamma")
        assert redundancy_violation(cand, [], ControllerConfig()) == 0.0

    def test_identical_output_hits_threshold_gap(self):
        cand = sample_with("c", "alpha beta gamma delta", "unrelated words here now")
        sel = sample_with("s", "alpha beta gamma delta", "other tokens entirely four")
        value = redundancy_violation(cand, [sel], ControllerConfig(tau=0.5))
        assert value == pytest.approx(0.5)  # same-system Dice 1.0 minus tau

    def test_similarity_below_threshold_clamps_to_zero(self):
        cand = sample_with("c", "alpha beta gamma")
        sel = sample_with("s", "epsilon zeta eta")
        assert redundancy_violation(cand, [sel], ControllerConfig(tau=0.5)) == 0.0

    def test_aggregates_by_max_over_selected(self):
        cand = sample_with("c", "alpha beta gamma delta")
        near = sample_with("s1", "alpha beta gamma epsilon")  # dice 4/6
        far = sample_with("s2", "mu nu xi omicron")
        cfg = ControllerConfig(tau=0.5)
        both = redundancy_violation(cand, [near, far], cfg)
        assert both == redundancy_violation(cand, [near], cfg)

    def test_permutation_invariance(self):
        cand = sample_with("c", "alpha beta gamma delta")
        sel = [
            sample_with("s1", "alpha beta gamma epsilon"),
            sample_with("s2", "alpha beta zeta eta"),
            sample_with("s3", "unrelated text here"),
        ]
        cfg = ControllerConfig(tau=0.3)
        forward = redundancy_violation(cand, sel, cfg)
        backward = redundancy_violation(cand, sel[::-1], cfg)
        assert forward == backward

    @given(
        tau_low=st.floats(0, 1),
        tau_high=st.floats(0, 1),
        overlap=st.integers(0, 4),
    )
    def test_violation_non_increasing_in_tau(self, tau_low, tau_high, overlap):
        if tau_low > tau_high:
            tau_low, tau_high = tau_high, tau_low
        shared = "alpha beta gamma delta epsilon"
        words = shared.split()[: overlap + 1]
        cand = sample_with("c", " ".join(words + ["qq", "rr"]))
        sel = sample_with("s", shared)
        low = redundancy_violation(cand, [sel], ControllerConfig(tau=tau_low))
        high = redundancy_violation(cand, [sel], ControllerConfig(tau=tau_high))
        assert high <= low


def test_rank_distance_examples():
    assert rank_distance(7, 7) == 0
    assert rank_distance(9, 6) == 3
    assert rank_distance(6, 9) == 3


def figure_style_fixture() -> tuple[Dataset, Sample, list[Bucket]]:
    """Nine ranked samples in three buckets plus one previously selected sample.

    Engineered so bucket 0 has exactly one feasible member (not the initial),
    bucket 1 has none, and bucket 2 is entirely feasible.
    """
    base = "alpha beta gamma delta"
    texts = {
        # bucket 0, ranks 0..2: "1" initial; only "3" is feasible
        "1": base,                            # dice 1.0 vs prior
        "3": "zeta eta theta",                # disjoint -> feasible
        "7": "alpha beta gamma epsilon",      # dice 4/6 vs prior
        # bucket 1, ranks 3..5: all infeasible, non-initial "0" has the
        # smallest violation
        "4": base,                            # dice 1.0
        "0": "alpha beta gamma xi",           # dice 4/6
        "6": "alpha beta gamma delta epsilon",  # dice 6/7
        # bucket 2, ranks 6..8: all feasible, "5" is the initial
        "5": "iota kappa lambda",
        "8": "mu nu omicron",
        "2": "pi rho sigma",
    }
    rank_order = ["1", "3", "7", "4", "0", "6", "5", "8", "2"]
    samples = [
        Sample(
            sample_id=sid,
            source=f"src {sid}",
            outputs={"sysA": texts[sid], "sysB": f"unique filler {sid} text"},
            human_scores={"sysA": {"q": 1.0}, "sysB": {"q": 1.0}},
        )
        for sid in sorted(texts)
    ]
    prior = Sample(
        sample_id="prior",
        source="src prior",
        outputs={"sysA": base, "sysB": "prior filler text words"},
        human_scores={"sysA": {"q": 1.0}, "sysB": {"q": 1.0}},
    )
    dataset = Dataset.from_samples(samples + [prior])
    scores = {sid: float(len(rank_order) - i) for i, sid in enumerate(rank_order)}
    buckets = make_buckets(QualityRanking.from_scores(scores), 3)
    return dataset, prior, buckets


class TestThreeRules:
    def test_rule1_single_feasible_member_wins(self):
        dataset, prior, buckets = figure_style_fixture()
        cfg = ControllerConfig(tau=0.5)
        assert (
            select_from_bucket(buckets[0], [prior], dataset.samples_by_id, cfg) == "3"
        )

    def test_rule2_smallest_violation_wins_when_none_feasible(self):
        dataset, prior, buckets = figure_style_fixture()
        cfg = ControllerConfig(tau=0.5)
        sel = [prior, dataset.samples_by_id["3"]]
        assert select_from_bucket(buckets[1], sel, dataset.samples_by_id, cfg) == "0"

    def test_rule3_initial_wins_when_all_feasible(self):
        dataset, prior, buckets = figure_style_fixture()
        cfg = ControllerConfig(tau=0.5)
        sel = [prior, dataset.samples_by_id["3"], dataset.samples_by_id["0"]]
        assert select_from_bucket(buckets[2], sel, dataset.samples_by_id, cfg) == "5"

    def test_full_walkthrough_selects_3_0_5(self):
        dataset, prior, buckets = figure_style_fixture()
        cfg = ControllerConfig(tau=0.5)
        chosen = select_phase(buckets, [prior], dataset.samples_by_id, cfg)
        assert chosen == ["3", "0", "5"]


class TestSelectPhase:
    def test_no_redundancy_reduces_to_initials(self):
        dataset, prior, buckets = figure_style_fixture()
        chosen = select_phase(buckets, [], dataset.samples_by_id, ControllerConfig(tau=1.0))
        assert chosen == [b.initial for b in buckets]

    def test_one_selection_per_bucket_no_repeats(self):
        dataset, prior, buckets = figure_style_fixture()
        chosen = select_phase(
            buckets, [prior], dataset.samples_by_id, ControllerConfig(tau=0.4)
        )
        assert len(chosen) == len(buckets)
        assert len(set(chosen)) == len(chosen)
        for sid, bucket in zip(chosen, buckets):
            assert sid in bucket.members

    def test_duplicate_heavy_bucket_yields_min_violation_member(self):
        # every member of the second bucket overlaps the first bucket's pick
        base = "one two three four five"
        texts = {
            "a": base,
            "b": "one two three four zz",     # dice 6/8 vs base
            "c": base + " six",               # dice 8/9 vs base
            "d": base,                        # dice 1.0 vs base
        }
        samples = [
            Sample(
                sample_id=sid,
                source="s",
                outputs={"sysA": t, "sysB": f"pad {sid} pad pad"},
                human_scores={"sysA": {"q": 1.0}, "sysB": {"q": 1.0}},
            )
            for sid, t in texts.items()
        ]
        dataset = Dataset.from_samples(samples)
        ranking = QualityRanking.from_scores({"a": 4.0, "b": 3.0, "c": 2.0, "d": 1.0})
        buckets = make_buckets(ranking, 2)  # [a, b] and [c, d]
        chosen = select_phase(buckets, [], dataset.samples_by_id, ControllerConfig(tau=0.5))
        # bucket 0 takes its initial "a"; in bucket 1 both members overlap
        # "a", and "c" (violation 8/9 - 0.5) beats "d" (violation 0.5)
        assert chosen == ["a", "c"]


def random_fixture(rng: random.Random):
    vocab = ["red", "blue", "green", "cyan", "gold", "pink", "onyx", "jade"]
    n = rng.randint(2, 12)
    samples = []
    for i in range(n):
        words = [rng.choice(vocab) for _ in range(rng.randint(2, 6))]
        words_b = [rng.choice(vocab) for _ in range(rng.randint(2, 6))]
        samples.append(
            Sample(
                sample_id=f"s{i:02d}",
                source="x",
                outputs={"sysA": " ".join(words), "sysB": " ".join(words_b)},
                human_scores={"sysA": {"q": 1.0}, "sysB": {"q": 1.0}},
            )
        )
    dataset = Dataset.from_samples(samples)
    scores = {s.sample_id: rng.random() for s in samples}
    quota = rng.randint(1, n)
    buckets = make_buckets(QualityRanking.from_scores(scores), quota)
    prior_count = rng.randint(0, n - 1)
    prior_ids = rng.sample([s.sample_id for s in samples], prior_count)
    prior = [dataset.samples_by_id[sid] for sid in prior_ids]
    return dataset, buckets, prior


def test_tau_one_always_returns_initials_200_random_fixtures():
    rng = random.Random(42)
    cfg = ControllerConfig(tau=1.0)
    for _ in range(200):
        dataset, buckets, prior = random_fixture(rng)
        chosen = select_phase(buckets, prior, dataset.samples_by_id, cfg)
        assert chosen == [b.initial for b in buckets]


def test_similarity_index_matches_direct_computation():
    rng = random.Random(3)
    dataset, buckets, prior = random_fixture(rng)
    index = SimilarityIndex(dataset)
    samples = dataset.samples
    for a in samples:
        for b in samples:
            assert index(a, b) == pytest.approx(pairwise_similarity(a, b), abs=0)


def test_select_phase_with_index_matches_plain(two_system_dataset):
    rng = random.Random(9)
    for _ in range(20):
        dataset, buckets, prior = random_fixture(rng)
        cfg = ControllerConfig(tau=0.3)
        plain = select_phase(buckets, prior, dataset.samples_by_id, cfg)
        indexed = select_phase(
            buckets, prior, dataset.samples_by_id, cfg, SimilarityIndex(dataset)
        )
        assert plain == indexed
