import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oga.embedding_io import TextClassifier
from oga.errors import NumericsError, ValidationError
from oga.zeroshot import compute_logits, shannon_entropy, softmax, zero_shot_predict

from conftest import SMALL_FIXTURE_ZS_ACC


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def test_logits_examples():
    clf = TextClassifier(np.array([[1.0, 0.0], [0.0, 1.0]]))
    logits = compute_logits(np.array([[1.0, 0.0], [0.6, 0.8]]), clf)
    assert logits[0, 0] == pytest.approx(1.0)
    assert logits[0, 1] == 0.0
    assert logits[1, 0] == pytest.approx(0.6, abs=1e-7)


def test_logits_dimension_mismatch():
    clf = TextClassifier(np.eye(3))
    with pytest.raises(ValidationError):
        compute_logits(np.ones((2, 4)) / 2, clf)


def test_softmax_uniform():
    np.testing.assert_allclose(softmax(np.full(5, 0.3), 0.01), 0.2)


def test_softmax_two_class_oracle():
    # direct evaluation: e / (e + 1) and 1 / (e + 1)
    e = math.e
    np.testing.assert_allclose(softmax(np.array([1.0, 0.0]), 1.0), [e / (e + 1), 1 / (e + 1)], rtol=1e-14)
    np.testing.assert_allclose(softmax(np.array([1.0, 0.0]), 1.0), [0.73106, 0.26894], atol=1e-5)


def test_softmax_sharp_no_overflow():
    with np.errstate(all="raise"):
        p = softmax(np.array([1.0, 0.0]), 0.01)
    assert p[0] == pytest.approx(1.0)
    assert p[1] == pytest.approx(math.exp(-100), rel=1e-12)
    assert p[1] == pytest.approx(3.7e-44, rel=0.01)


def test_softmax_nonfinite():
    with pytest.raises(NumericsError):
        softmax(np.array([np.inf, 0.0]), 1.0)


def test_entropy_examples():
    assert shannon_entropy(np.array([0.0, 1.0, 0.0])) == 0.0
    assert shannon_entropy(np.full(4, 0.25)) == pytest.approx(math.log(4))
    p = [0.73106, 0.26894]
    oracle = -sum(x * math.log(x) for x in p)
    assert shannon_entropy(np.array(p)) == pytest.approx(oracle, rel=1e-12)
    assert shannon_entropy(np.array(p)) == pytest.approx(0.58220, abs=1e-5)


def test_entropy_negative_probability():
    with pytest.raises(ValidationError):
        shannon_entropy(np.array([1.2, -0.2]))


def test_predict_class_embeddings_are_classified_as_themselves():
    rng = np.random.default_rng(0)
    clf = TextClassifier(rng.standard_normal((6, 10)), 0.01)
    out = zero_shot_predict(clf.class_embeddings, clf)
    np.testing.assert_array_equal(out.pseudo_label, np.arange(6))


def test_predict_empty_batch():
    clf = TextClassifier(np.eye(3))
    out = zero_shot_predict(np.empty((0, 3)), clf)
    assert out.probs.shape == (0, 3) and out.pseudo_label.shape == (0,)


def test_ties_go_to_lowest_index():
    clf = TextClassifier(np.array([[1.0, 1.0], [1.0, 1.0], [1.0, -1.0]]))
    out = zero_shot_predict(np.array([[1.0, 1.0]]) / math.sqrt(2), clf)
    assert out.pseudo_label[0] == 0


def test_small_fixture_accuracy(small_fixture):
    eset, clf = small_fixture
    out = zero_shot_predict(eset.features, clf)
    assert np.mean(out.pseudo_label == eset.labels) == SMALL_FIXTURE_ZS_ACC


def batches(k=st.integers(2, 6), d=st.integers(2, 6)):
    @st.composite
    def make(draw):
        kk, dd = draw(k), draw(d)
        b = draw(st.integers(1, 5))
        elems = st.floats(-1, 1, allow_nan=False).filter(lambda v: abs(v) > 1e-3)
        t = draw(arrays(np.float64, (kk, dd), elements=elems))
        f = draw(arrays(np.float64, (b, dd), elements=elems))
        tau = draw(st.sampled_from([0.01, 0.1, 1.0]))
        return TextClassifier(t, tau), f / np.linalg.norm(f, axis=1, keepdims=True)
    return make()


@settings(max_examples=100, deadline=None)
@given(batches())
def test_output_invariants(case):
    clf, f = case
    out = zero_shot_predict(f, clf)
    np.testing.assert_allclose(out.probs.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(out.entropy >= 0)
    assert np.all(out.entropy <= math.log(clf.n_classes) + 1e-12)
    assert np.all(np.abs(out.logits) <= 1 + 1e-6)
    np.testing.assert_array_equal(out.pseudo_label, np.argmax(out.probs, axis=1))
    np.testing.assert_array_equal(out.pseudo_label, np.argmax(out.logits, axis=1))


@settings(max_examples=50, deadline=None)
@given(batches(), st.randoms(use_true_random=False))
def test_class_permutation_equivariance(case, rnd):
    clf, f = case
    perm = list(range(clf.n_classes))
    rnd.shuffle(perm)
    permuted = TextClassifier(clf.class_embeddings[perm], clf.temperature)
    a = zero_shot_predict(f, clf)
    b = zero_shot_predict(f, permuted)
    np.testing.assert_allclose(b.probs, a.probs[:, perm], atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 4, elements=st.floats(-1, 1)))
def test_entropy_decreases_with_temperature(logits):
    if np.ptp(logits) < 1e-3:
        return
    h = [shannon_entropy(softmax(logits, tau)) for tau in (1.0, 0.5, 0.1)]
    assert h[0] > h[1] > h[2]
