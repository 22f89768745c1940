import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from vertebrate import NEGATIVE, POSITIVE
from vertebrate.classify import LabeledDataset
from vertebrate.gbt import GBTModel, Tree, _SplitFinder, grow_tree, log_loss, sigmoid, train_gbt


def sse(v):
    return float(((v - v.mean()) ** 2).sum()) if len(v) else 0.0


def brute_best_split(X, r, min_leaf=1):
    best = 0.0
    for f in range(X.shape[1]):
        for thr in np.unique(X[:, f])[:-1]:
            left = X[:, f] <= thr
            if left.sum() < min_leaf or (~left).sum() < min_leaf:
                continue
            best = max(best, sse(r) - sse(r[left]) - sse(r[~left]))
    return best


small = st.tuples(st.integers(2, 30), st.integers(1, 4)).flatmap(
    lambda s: st.tuples(arrays(np.float64, s, elements=st.integers(0, 5).map(float)),
                        arrays(np.float64, s[0], elements=st.floats(-1, 1, allow_nan=False))))


@given(small, st.integers(1, 3))
def test_split_gain_matches_brute_force(Xr, min_leaf):
    X, r = Xr
    found = _SplitFinder(X, min_leaf, 1e-12).best(np.arange(len(r)), r)
    expected = brute_best_split(X, r, min_leaf)
    if found is None:
        assert expected <= 1e-9
    else:
        gain, f, thr = found
        assert gain == pytest.approx(expected, abs=1e-9)
        left = X[:, f] <= thr
        assert sse(r) - sse(r[left]) - sse(r[~left]) == pytest.approx(gain, abs=1e-9)


def test_tree_apply_and_serialization():
    X = np.array([[0.0, 5.0], [1.0, 2.0], [2.0, 9.0], [3.0, 1.0]])
    r = np.array([-1.0, -1.0, 1.0, 3.0])
    tree = grow_tree(_SplitFinder(X, 1, 1e-12), X, r, "levelwise", max_depth=1, max_leaves=31)
    assert tree.n_leaves == 2
    assert tree.feature[0] == 0 and tree.threshold[0] == 1.0
    assert tree.predict(X).tolist() == [-1.0, -1.0, 2.0, 2.0]
    assert Tree.from_dict(json.loads(json.dumps(tree.to_dict()))) == tree


def test_depth_and_leaf_caps():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(200, 4))
    r = rng.normal(size=200)
    finder = _SplitFinder(X, 1, 1e-12)
    level = grow_tree(finder, X, r, "levelwise", max_depth=3, max_leaves=31)
    assert level.n_leaves <= 8
    leaf = grow_tree(finder, X, r, "leafwise", max_depth=-1, max_leaves=5)
    assert leaf.n_leaves == 5
    capped = grow_tree(finder, X, r, "leafwise", max_depth=1, max_leaves=31)
    assert capped.n_leaves == 2


def test_leaf_means_give_exact_least_squares_fit():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(50, 2))
    r = rng.normal(size=50)
    tree = grow_tree(_SplitFinder(X, 1, 1e-12), X, r, "leafwise", max_depth=-1, max_leaves=6)
    leaves = tree.apply(X)
    for leaf in np.unique(leaves):
        assert tree.value[leaf] == pytest.approx(r[leaves == leaf].mean())


def test_sigmoid_and_loss_are_stable():
    assert sigmoid(np.array([-800.0, 0.0, 800.0])).tolist() == [0.0, 0.5, 1.0]
    assert log_loss(np.array([1, 0]), np.array([800.0, -800.0])) == pytest.approx(0.0)
    assert log_loss(np.array([1]), np.array([0.0])) == pytest.approx(np.log(2))


def data(n=80, dim=3, seed=0, flip=0.1):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, dim))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0) ^ (rng.random(n) < flip)
    return LabeledDataset([str(i) for i in range(n)], [POSITIVE if v else NEGATIVE for v in y], X)


def test_base_score_is_logit_of_base_rate():
    d = data()
    p = d.y.mean()
    model = train_gbt(d, rounds=1)
    assert model.base_score == pytest.approx(np.log(p / (1 - p)))
    one_class = LabeledDataset(["a", "b"], [POSITIVE, POSITIVE], np.zeros((2, 1)))
    assert train_gbt(one_class, rounds=2).base_score == pytest.approx(np.log((1 - 1e-6) / 1e-6))


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.sampled_from(["levelwise", "leafwise"]),
       st.sampled_from([0.05, 0.3, 1.0, 4.0]))
def test_training_loss_never_increases(seed, mode, lr):
    depth = 3 if mode == "levelwise" else None
    model = train_gbt(data(seed=seed, n=60), mode=mode, rounds=12, learning_rate=lr, max_depth=depth,
                      max_leaves=6, seed=seed)
    loss = np.array(model.loss_history)
    assert len(loss) == 13
    assert (np.diff(loss) <= 1e-12).all()


def test_learns_training_set():
    d = data(flip=0.0)
    for mode in ("levelwise", "leafwise"):
        model = train_gbt(d, mode=mode, rounds=60, learning_rate=0.3)
        assert np.mean(np.array(model.predict(d.X)) == np.array(d.labels)) > 0.95
        partial = model.raw_scores(d.X, n_rounds=0)
        assert np.allclose(partial, model.base_score)


def test_roundtrip_and_validation():
    d = data()
    model = train_gbt(d, rounds=3, subsample=0.5, seed=1)
    again = GBTModel.from_parameters(model.kind, model.seed, model.hyperparameters, model.n_features,
                                     json.loads(json.dumps(model.parameters())))
    assert np.array_equal(again.decision(d.X), model.decision(d.X))
    for kwargs in ({"rounds": 0}, {"mode": "depthwise"}, {"learning_rate": 0}, {"max_leaves": 1},
                   {"subsample": 0.0}, {"max_depth": 0}):
        with pytest.raises(ValueError):
            train_gbt(d, **kwargs)
