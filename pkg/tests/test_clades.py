import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from vertebrate import NEGATIVE, POSITIVE
from vertebrate.clades import (
    EXCLUDED, UNASSIGNED, CladeError, Dendrogram, assign_clade_sentiments, cut_dendrogram, default_threshold,
    propagate_labels, read_sentiment_csv, ward_cluster,
)
from vertebrate.topicmodel import OUTLIER_ID, Topic, TopicModel

from oracles import brute_ward


def test_hand_case():
    d = ward_cluster([[0.0], [1.0], [3.0]])
    assert [(m.left, m.right, m.size) for m in d.merges] == [(0, 1, 2), (2, 3, 3)]
    assert d.merges[0].distance == pytest.approx(1.0)
    assert d.merges[1].distance == pytest.approx(25 / 3)
    assert d.leaf_order() == [2, 0, 1]


def test_ties_go_to_lowest_pair():
    d = ward_cluster([[0.0], [1.0], [2.0], [3.0]])
    assert (d.merges[0].left, d.merges[0].right) == (0, 1)
    assert (d.merges[1].left, d.merges[1].right) == (2, 3)


def test_leaf_labels_and_validation():
    d = ward_cluster([[0.0], [5.0]], leaves=[7, 9])
    assert d.leaves == (7, 9)
    with pytest.raises(CladeError):
        ward_cluster([[0.0]])
    with pytest.raises(CladeError):
        ward_cluster([[0.0], [1.0]], leaves=[1])
    assert Dendrogram.from_dict(json.loads(json.dumps(d.to_dict()))) == d


coords = arrays(np.float64, st.tuples(st.integers(2, 9), st.integers(1, 4)),
                elements=st.floats(-10, 10, allow_nan=False), unique=False)


@given(coords)
def test_matches_brute_force_objective(X):
    got = ward_cluster(X)
    want = brute_ward(X)
    heights = [m.distance for m in got.merges]
    assert heights == pytest.approx([h for _, _, h in want], abs=1e-7, rel=1e-9)


@given(coords)
def test_heights_monotone_and_sizes_add_up(X):
    d = ward_cluster(X)
    heights = [m.distance for m in d.merges]
    assert all(b >= a - 1e-9 for a, b in zip(heights, heights[1:]))
    assert d.merges[-1].size == len(X)
    assert sorted(d.leaf_order()) == list(range(len(X)))


def _tree():
    # leaves 0,1 close; 2,3 close; 4 far away
    return ward_cluster([[0.0], [0.5], [5.0], [5.4], [20.0]], leaves=[10, 11, 12, 13, 14])


def test_cut_by_count_and_threshold():
    d = _tree()
    cut = cut_dendrogram(d, n_clades=3)
    assert [c.member_topic_ids for c in cut.clades] == [(10, 11), (12, 13), (14,)]
    assert cut.clade_of()[13] == 1
    assert len(cut_dendrogram(d, n_clades=1).clades) == 1
    assert len(cut_dendrogram(d, n_clades=5).clades) == 5
    by_height = cut_dendrogram(d, threshold=1.0)
    assert [c.member_topic_ids for c in by_height.clades] == [(10, 11), (12, 13), (14,)]
    top = d.merges[-1].distance
    assert len(cut_dendrogram(d, threshold=top).clades) == 2  # strict inequality
    assert default_threshold(d, 0.5) == pytest.approx(top / 2)


def test_cut_validation():
    d = _tree()
    for kwargs in ({}, {"threshold": 1.0, "n_clades": 2}, {"threshold": 0.0}, {"n_clades": 6}, {"n_clades": 0}):
        with pytest.raises(CladeError):
            cut_dendrogram(d, **kwargs)


@given(coords, st.data())
def test_cut_partitions_leaves(X, data):
    d = ward_cluster(X)
    k = data.draw(st.integers(1, len(X)))
    cut = cut_dendrogram(d, n_clades=k)
    assert len(cut.clades) == k
    members = sorted(t for c in cut.clades for t in c.member_topic_ids)
    assert members == list(range(len(X)))
    firsts = [min(c.member_topic_ids) for c in cut.clades]
    assert firsts == sorted(firsts)


def _model():
    topics = [Topic(i, [f"t{i}c{j}" for j in range(i + 1)], np.zeros(2)) for i in range(5)]
    return TopicModel(topics, Topic(OUTLIER_ID, ["o1"], np.zeros(2)))


def test_assign_and_propagate(tmp_path, caplog):
    cut = cut_dendrogram(_tree(), n_clades=3)
    remap = cut_dendrogram(ward_cluster([[0.0], [0.5], [5.0], [5.4], [20.0]]), n_clades=3)
    labels = assign_clade_sentiments(remap, {0: POSITIVE, 1: NEGATIVE}, exclusions=[OUTLIER_ID, 3],
                                     overrides={4: NEGATIVE})
    assert labels.topic_sentiments == {0: POSITIVE, 1: POSITIVE, 2: NEGATIVE, 3: EXCLUDED, 4: NEGATIVE,
                                       OUTLIER_ID: EXCLUDED}
    assert labels.clades[2].sentiment == UNASSIGNED
    data = propagate_labels(labels, _model())
    assert data.ids == ["t0c0", "t1c0", "t1c1", "t2c0", "t2c1", "t2c2"] + [f"t4c{j}" for j in range(5)]
    assert data.class_counts == {NEGATIVE: 8, POSITIVE: 3}
    with pytest.raises(CladeError):
        assign_clade_sentiments(cut, {0: POSITIVE}, strict=True)
    with pytest.raises(CladeError):
        assign_clade_sentiments(cut, {9: POSITIVE})
    with pytest.raises(CladeError):
        assign_clade_sentiments(cut, {0: "happy"})


def test_read_sentiment_csv(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("clade_id,sentiment\n0, Positive\n1,negative\n")
    assert read_sentiment_csv(p, "clade_id") == {0: POSITIVE, 1: NEGATIVE}
