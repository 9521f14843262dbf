import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from femda.errors import DimensionMismatch, InvalidRange, NotPositiveDefinite
from femda.linalg import (
    SPDMatrix,
    cholesky,
    log_det,
    mahalanobis_sq,
    random_orthogonal,
    random_spd,
    sample_unit_sphere,
)


def test_cholesky_identity_and_diagonal():
    np.testing.assert_array_equal(cholesky(np.eye(2)), np.eye(2))
    np.testing.assert_allclose(cholesky(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))


def test_cholesky_2x2():
    L = cholesky([[4.0, 2.0], [2.0, 5.0]])
    np.testing.assert_allclose(L, [[2.0, 0.0], [1.0, 2.0]])
    # [[2,0],[1,2]] @ [[2,1],[0,2]] = [[4,2],[2,5]]
    np.testing.assert_allclose(L @ L.T, [[4.0, 2.0], [2.0, 5.0]])


@pytest.mark.parametrize("bad", [[[1.0, 2.0], [2.0, 1.0]], [[0.0, 0.0], [0.0, 1.0]], [[np.nan, 0], [0, 1]]])
def test_cholesky_rejects_non_pd(bad):
    with pytest.raises(NotPositiveDefinite):
        cholesky(bad)


def test_spd_matrix_rejects_asymmetric():
    with pytest.raises(ValueError):
        SPDMatrix([[1.0, 0.5], [0.0, 1.0]])


def test_spd_cache_reconstructs():
    s = SPDMatrix([[4.0, 2.0], [2.0, 5.0]])
    L = s.chol
    assert s.chol is L
    assert np.linalg.norm(L @ L.T - s.entries) <= 1e-10 * np.linalg.norm(s.entries)


def test_log_det_examples():
    assert log_det(np.eye(5)) == 0.0
    assert log_det(np.diag([2.0, 3.0])) == pytest.approx(np.log(6.0), abs=1e-14)
    assert log_det(3.5 * np.eye(4)) == pytest.approx(4 * np.log(3.5), abs=1e-12)


def test_mahalanobis_examples():
    assert mahalanobis_sq([1.0, 2.0], [1.0, 2.0], np.diag([3.0, 7.0])) == 0.0
    assert mahalanobis_sq([3.0, 4.0], [0.0, 0.0], np.eye(2)) == pytest.approx(25.0)
    # diag(4,1)^{-1} applied to (2,1): 4/4 + 1/1
    assert mahalanobis_sq([2.0, 1.0], [0.0, 0.0], np.diag([4.0, 1.0])) == pytest.approx(2.0)


def test_mahalanobis_batch_and_dimension_check(rng):
    s = random_spd(3, (1, 4), rng)
    x = rng.standard_normal((7, 3))
    batch = mahalanobis_sq(x, np.zeros(3), s)
    single = [mahalanobis_sq(row, np.zeros(3), s) for row in x]
    np.testing.assert_allclose(batch, single)
    with pytest.raises(DimensionMismatch):
        mahalanobis_sq(np.zeros(2), np.zeros(3), s)


spd_seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=50, deadline=None)
@given(seed=spd_seeds, c=st.floats(1e-3, 1e3), m=st.integers(1, 8))
def test_mahalanobis_scaling(seed, c, m):
    r = np.random.default_rng(seed)
    s = random_spd(m, (0.2, 5.0), r)
    x, mu = r.standard_normal(m), r.standard_normal(m)
    base = mahalanobis_sq(x, mu, s)
    assert mahalanobis_sq(x, mu, c * s.entries) == pytest.approx(base / c, rel=1e-10)
    assert log_det(c * s.entries) == pytest.approx(log_det(s) + m * np.log(c), abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(seed=spd_seeds, m=st.integers(1, 6))
def test_mahalanobis_affine_invariance(seed, m):
    r = np.random.default_rng(seed)
    s = random_spd(m, (0.5, 3.0), r)
    A = random_orthogonal(m, r) @ np.diag(r.uniform(0.5, 2.0, m))
    b = r.standard_normal(m)
    x, mu = r.standard_normal(m), r.standard_normal(m)
    s2 = A @ s.entries @ A.T
    s2 = 0.5 * (s2 + s2.T)
    assert mahalanobis_sq(A @ x + b, A @ mu + b, s2) == pytest.approx(
        mahalanobis_sq(x, mu, s), rel=1e-8
    )


def test_unit_sphere(rng):
    for _ in range(20):
        assert sample_unit_sphere(1, rng)[0] in (-1.0, 1.0)
    draws = sample_unit_sphere(7, rng, size=500)
    np.testing.assert_allclose(np.linalg.norm(draws, axis=1), 1.0, atol=1e-12)
    mean = sample_unit_sphere(3, rng, size=100_000).mean(axis=0)
    assert np.all(np.abs(mean) < 0.02)


def test_unit_sphere_bad_dimension(rng):
    with pytest.raises(InvalidRange):
        sample_unit_sphere(0, rng)


@pytest.mark.parametrize("m", [1, 2, 5, 10])
def test_random_orthogonal(rng, m):
    q = random_orthogonal(m, rng)
    assert np.linalg.norm(q.T @ q - np.eye(m)) <= 1e-10
    assert abs(abs(np.linalg.det(q)) - 1) <= 1e-10
    if m == 1:
        assert q[0, 0] in (-1.0, 1.0)


def test_random_spd(rng):
    np.testing.assert_allclose(random_spd(6, (1, 1), rng).entries, np.eye(6), atol=1e-10)
    s = random_spd(4, (0.5, 2.0), rng)
    ev = np.linalg.eigvalsh(s.entries)
    assert ev.min() >= 0.5 - 1e-8 and ev.max() <= 2.0 + 1e-8
    np.testing.assert_array_equal(s.entries, s.entries.T)
    cholesky(s)
    with pytest.raises(InvalidRange):
        random_spd(3, (2.0, 1.0), rng)
    with pytest.raises(InvalidRange):
        random_spd(3, (0.0, 1.0), rng)
