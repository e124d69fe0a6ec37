import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oga.errors import DegenerateCovariance
from oga.gaussian import (
    Estimator,
    bayes_ridge_precision,
    fit_centroids,
    fit_covariance,
    inverse_precision,
    refit,
    select_precision,
)

from conftest import random_spd


def naive_fit(snapshot):
    """Double loop over classes and cached samples."""
    d = len(snapshot[0][0]) if len(snapshot[0]) else snapshot[0].shape[1]
    mus = []
    for feats in snapshot:
        if len(feats) == 0:
            mus.append(None)
            continue
        mu = [0.0] * d
        for f in feats:
            for j in range(d):
                mu[j] += f[j] / len(feats)
        mus.append(mu)
    n = sum(len(f) for f in snapshot)
    sigma = [[0.0] * d for _ in range(d)]
    for k, feats in enumerate(snapshot):
        for f in feats:
            dev = [f[j] - mus[k][j] for j in range(d)]
            for a in range(d):
                for b in range(d):
                    sigma[a][b] += dev[a] * dev[b] / (n - 1)
    return mus, np.array(sigma), n


def random_snapshot(rng, k, d, counts):
    out = []
    for c in counts:
        f = rng.standard_normal((c, d)).reshape(c, d)
        if c:
            f /= np.linalg.norm(f, axis=1, keepdims=True)
        out.append(f)
    return tuple(out)


def test_centroid_examples():
    snap = (np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([[0.6, 0.8]]), np.empty((0, 2)))
    mu, present = fit_centroids(snap)
    np.testing.assert_allclose(mu[0], [0.5, 0.5])
    np.testing.assert_array_equal(mu[1], [0.6, 0.8])
    assert list(present) == [True, True, False]
    assert np.all(np.isnan(mu[2]))


def test_covariance_two_samples_one_class():
    snap = (np.array([[1.0, 0.0], [0.0, 1.0]]),)
    mu, _ = fit_centroids(snap)
    sigma, n = fit_covariance(snap, mu)
    assert n == 2
    np.testing.assert_allclose(sigma, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-15)


def test_covariance_zero_when_samples_are_centroids():
    snap = (np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]))
    mu, _ = fit_centroids(snap)
    sigma, n = fit_covariance(snap, mu)
    assert n == 2 and not sigma.any()
    _, used = select_precision(sigma, n, 2)
    assert used is Estimator.IDENTITY_FALLBACK


def test_covariance_needs_two():
    snap = (np.array([[1.0, 0.0]]), np.empty((0, 2)))
    with pytest.raises(DegenerateCovariance):
        fit_covariance(snap, fit_centroids(snap)[0])


def test_ridge_identity_case():
    p = bayes_ridge_precision(np.eye(4), 8, 4)
    np.testing.assert_allclose(p, np.eye(4) / 3, atol=1e-15)


@pytest.mark.parametrize("d", [1, 2, 3, 4, 7])
@pytest.mark.parametrize("n", [2, 3, 8, 15, 100])
def test_ridge_identity_closed_form(d, n):
    np.testing.assert_allclose(bayes_ridge_precision(np.eye(d), n, d), d / (n + d) * np.eye(d),
                               atol=1e-12, rtol=0)


def test_ridge_diagonal_example():
    np.testing.assert_allclose(bayes_ridge_precision(np.diag([2.0, 0.0]), 2, 2),
                               np.diag([1 / 3, 1.0]), atol=1e-15)


def test_ridge_zero_sigma():
    with pytest.raises(DegenerateCovariance):
        bayes_ridge_precision(np.zeros((3, 3)), 4, 3)


@pytest.mark.parametrize("n,expected", [(15, Estimator.RIDGE), (16, Estimator.INVERSE),
                                         (2, Estimator.RIDGE), (1, Estimator.IDENTITY_FALLBACK),
                                         (0, Estimator.IDENTITY_FALLBACK)])
def test_switch_at_four_d(n, expected):
    _, used = select_precision(random_spd(np.random.default_rng(0), 4), n, 4)
    assert used is expected


def test_policies():
    sigma = random_spd(np.random.default_rng(1), 3)
    assert select_precision(sigma, 100, 3, "ridge")[1] is Estimator.RIDGE
    assert select_precision(sigma, 2, 3, "inverse")[1] is Estimator.INVERSE


def test_inverse_jitter_and_pinv():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((3, 5))
    singular = a.T @ a  # rank 3 in 5 dims
    p = inverse_precision(singular)
    assert np.all(np.isfinite(p)) and np.allclose(p, p.T)
    pinv = inverse_precision(singular, "pinv")
    np.testing.assert_allclose(singular @ pinv @ singular, singular, atol=1e-8)


def test_refit_empty_and_repeat():
    empty = (np.empty((0, 3)),) * 4
    m = refit(empty)
    assert m.estimator is Estimator.IDENTITY_FALLBACK and m.n == 0 and not m.present.any()
    snap = random_snapshot(np.random.default_rng(3), 3, 4, [3, 2, 4])
    assert refit(snap) == refit(snap)


def test_refit_two_sample_example():
    snap = (np.array([[1.0, 0.0], [0.0, 1.0]]), np.empty((0, 2)))
    m = refit(snap)
    np.testing.assert_allclose(m.covariance, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-15)
    assert m.estimator is Estimator.RIDGE
    np.testing.assert_allclose(m.precision, bayes_ridge_precision(m.covariance, 2, 2))


snapshots = st.builds(
    lambda seed, k, d, counts: random_snapshot(np.random.default_rng(seed), k, d, counts[:k]),
    st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(2, 8),
    st.lists(st.integers(0, 8), min_size=5, max_size=5),
)


@settings(max_examples=150, deadline=None)
@given(snapshots)
def test_refit_matches_naive(snap):
    n = sum(len(f) for f in snap)
    m = refit(snap)
    assert m.n == n
    if n < 2:
        assert m.estimator is Estimator.IDENTITY_FALLBACK
        return
    mus, sigma, _ = naive_fit(snap)
    for k, mu in enumerate(mus):
        if mu is None:
            assert not m.present[k]
        else:
            np.testing.assert_allclose(m.centroids[k], mu, atol=1e-10, rtol=0)
    np.testing.assert_allclose(m.covariance, sigma, atol=1e-10, rtol=0)
    np.testing.assert_allclose(m.covariance, m.covariance.T, atol=1e-9, rtol=0)
    np.testing.assert_allclose(m.precision, m.precision.T, atol=1e-9, rtol=0)
    d = m.d
    if m.estimator is not Estimator.IDENTITY_FALLBACK:
        assert (m.estimator is Estimator.RIDGE) == (n < 4 * d)
        x = np.random.default_rng(n).standard_normal((100, d))
        assert np.all(np.einsum("bi,ij,bj->b", x, m.precision, x) > 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_inverse_path_recovers_identity(seed, d):
    rng = np.random.default_rng(seed)
    sigma = random_spd(rng, d)
    p, used = select_precision(sigma, 4 * d, d)
    assert used is Estimator.INVERSE
    np.testing.assert_allclose(p @ sigma, np.eye(d), atol=1e-6)
