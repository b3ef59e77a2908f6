from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from casf.dataset import (
    Dataset,
    DatasetError,
    Sample,
    load_dataset,
    serialize_dataset,
    validate,
)

from conftest import tiny_sample


def write_jsonl(path, records):
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")


def record(sid, outputs, human=None, external=None):
    r = {
        "sample_id": sid,
        "source": f"src {sid}",
        "references": ["a reference text"],
        "outputs": outputs,
    }
    if human is not None:
        r["human_scores"] = human
    if external is not None:
        r["external_metrics"] = external
    return r


def test_load_three_line_file(tmp_path):
    path = tmp_path / "d.jsonl"
    write_jsonl(
        path,
        [
            record(f"s{i}", {"sysA": "a", "sysB": "b"}, {"sysA": {"q": 1}, "sysB": {"q": 2}})
            for i in range(3)
        ],
    )
    d = load_dataset(path)
    assert d.n_samples == 3
    assert d.systems == ("sysA", "sysB")
    assert d.aspects == ("q",)


def test_missing_system_output_names_sample(tmp_path):
    path = tmp_path / "d.jsonl"
    write_jsonl(
        path,
        [
            record("s0", {"sysA": "a", "sysB": "b"}, {"sysA": {"q": 1}, "sysB": {"q": 2}}),
            record("s1", {"sysA": "a"}, {"sysA": {"q": 1}}),
        ],
    )
    with pytest.raises(DatasetError, match="s1"):
        load_dataset(path)


def test_aspects_are_sorted_union(tmp_path):
    path = tmp_path / "d.jsonl"
    human = {
        "sysA": {"relevance": 1.0, "fluency": 2.0},
        "sysB": {"relevance": 3.0, "fluency": 4.0},
    }
    write_jsonl(
        path,
        [record(f"s{i}", {"sysA": "a", "sysB": "b"}, human) for i in range(2)],
    )
    d = load_dataset(path)
    assert d.aspects == ("fluency", "relevance")


def test_parse_error_reports_line_number(tmp_path):
    path = tmp_path / "d.jsonl"
    good = json.dumps(record("s0", {"sysA": "a", "sysB": "b"}))
    path.write_text(good + "\nnot json\n", encoding="utf-8")
    with pytest.raises(DatasetError, match="line 2"):
        load_dataset(path)


def test_duplicate_sample_id_rejected(tmp_path):
    path = tmp_path / "d.jsonl"
    write_jsonl(
        path,
        [
            record("dup", {"sysA": "a", "sysB": "b"}, {"sysA": {"q": 1}, "sysB": {"q": 1}}),
            record("dup", {"sysA": "a", "sysB": "b"}, {"sysA": {"q": 1}, "sysB": {"q": 1}}),
        ],
    )
    with pytest.raises(DatasetError, match="duplicate"):
        load_dataset(path)


def test_partial_human_scores_rejected():
    s = tiny_sample("s0", {"sysA": "a", "sysB": "b"}, {"sysA": {"q": 1.0}})
    with pytest.raises(DatasetError, match="every system"):
        Dataset.from_samples([s])


def test_sidecar_merge(tmp_path):
    data = tmp_path / "d.jsonl"
    write_jsonl(
        data,
        [
            record(f"s{i}", {"sysA": "a", "sysB": "b"}, {"sysA": {"q": 1}, "sysB": {"q": 2}})
            for i in range(2)
        ],
    )
    sidecar = tmp_path / "m.json"
    sidecar.write_text(
        json.dumps(
            {"mover_score": {f"s{i}": {"sysA": 0.5, "sysB": 0.6} for i in range(2)}}
        ),
        encoding="utf-8",
    )
    d = load_dataset(data, sidecar=sidecar)
    assert d.samples[0].external_metrics["mover_score"]["sysB"] == 0.6


def test_validate_full_coverage(two_system_dataset):
    samples = [
        Sample(
            sample_id=s.sample_id,
            source=s.source,
            references=s.references,
            outputs=s.outputs,
            human_scores=s.human_scores,
            external_metrics={"mover_score": {"sysA": 0.1, "sysB": 0.2}},
        )
        for s in two_system_dataset.samples
    ]
    d = Dataset.from_samples(samples)
    report = validate(d, ["mover_score"])
    assert report.ok
    assert report.metric_coverage["mover_score"] == 1.0


def test_validate_counts_missing_cells(two_system_dataset):
    # 5 samples x 2 systems = 10 cells; drop one -> coverage 0.9, one error
    samples = list(two_system_dataset.samples)
    patched = []
    for i, s in enumerate(samples):
        cells = {"sysA": 0.1, "sysB": 0.2} if i > 0 else {"sysA": 0.1}
        patched.append(
            Sample(
                sample_id=s.sample_id,
                source=s.source,
                references=s.references,
                outputs=s.outputs,
                human_scores=s.human_scores,
                external_metrics={"mover_score": cells},
            )
        )
    d = Dataset.from_samples(patched)
    report = validate(d, ["mover_score"])
    assert report.metric_coverage["mover_score"] == pytest.approx(0.9)
    assert len(report.errors) == 1
    assert report.errors[0][0] == "s0"


def test_validate_no_required_metrics(two_system_dataset):
    report = validate(two_system_dataset, [])
    assert report.ok
    assert report.metric_coverage == {}


ids = st.lists(
    st.text(alphabet="abcdefgh0123", min_size=1, max_size=8),
    min_size=1,
    max_size=6,
    unique=True,
)
texts = st.text(alphabet="abc xyz", max_size=20)


@settings(max_examples=50, deadline=None)
@given(ids=ids, data=st.data())
def test_roundtrip_serialize_load(tmp_path_factory, ids, data):
    systems = ["m1", "m2"]
    aspects = ["acc", "flu"]
    samples = []
    for sid in ids:
        samples.append(
            Sample(
                sample_id=sid,
                source=data.draw(texts),
                references=tuple(data.draw(st.lists(texts, max_size=2))),
                outputs={s: data.draw(texts) for s in systems},
                human_scores={
                    s: {
                        a: data.draw(
                            st.floats(-5, 5, allow_nan=False, allow_infinity=False)
                        )
                        for a in aspects
                    }
                    for s in systems
                },
            )
        )
    d = Dataset.from_samples(samples)
    path = tmp_path_factory.mktemp("rt") / "d.jsonl"
    path.write_text(serialize_dataset(d), encoding="utf-8")
    d2 = load_dataset(path)
    assert d2 == d


def test_ordering_is_content_determined():
    def build(order):
        samples = []
        for sid in order:
            samples.append(
                tiny_sample(
                    sid,
                    {"b_sys": "x", "a_sys": "y"},
                    {"b_sys": {"z": 1.0, "a": 2.0}, "a_sys": {"z": 1.0, "a": 2.0}},
                )
            )
        return Dataset.from_samples(samples)

    d = build(["s1", "s2"])
    assert d.systems == ("a_sys", "b_sys")
    assert d.aspects == ("a", "z")
