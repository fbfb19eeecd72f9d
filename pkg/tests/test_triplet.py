import numpy as np
import pytest

from src.core.errors import DegenerateInputError, DimensionMismatchError, TrainingDivergenceError
from src.core.rng import seeded_rng
from src.core.types import Embedding, EmbeddingMatrix, Objective, Triplet
from src.embedding.normalize import PyramidLevel, l2_normalize, l2_normalize_rows, normalize_pyramid
from src.embedding.similarity import cosine_similarity, cosine_similarity_matrix
from src.embedding.triplet import (
    hinge_loss,
    project,
    project_rows,
    sgd_update,
    tde_gradient,
    tde_loss,
    tde_margin_violation,
    tde_sgd_step,
    triplet_loss,
    tse_gradient,
    tse_margin_violation,
    tse_sgd_step,
)


def _triplet(a, p, n):
    return Triplet(
        anchor=Embedding(a, "x", "m0"),
        positive=Embedding(p, "x", "m1"),
        negative=Embedding(n, "y", "m2"),
    )


def test_l2_normalize():
    assert np.allclose(l2_normalize([3.0, 4.0]), [0.6, 0.8])
    unit = np.array([0.6, 0.8])
    assert np.array_equal(l2_normalize(unit), unit)
    with pytest.raises(DegenerateInputError):
        l2_normalize([0.0, 0.0])


def test_l2_normalize_rows_reports_zero_rows():
    with pytest.raises(DegenerateInputError, match=r"\[1\]"):
        l2_normalize_rows([[1.0, 0.0], [0.0, 0.0]])


def test_cosine_similarity():
    assert cosine_similarity([0.6, 0.8], [0.6, 0.8]) == pytest.approx(1.0)
    assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0
    assert cosine_similarity([1.0, 0.0], [0.6, 0.8]) == pytest.approx(0.6)
    with pytest.raises(DegenerateInputError):
        cosine_similarity([3.0, 4.0], [1.0, 0.0])
    with pytest.raises(DimensionMismatchError):
        cosine_similarity([1.0, 0.0], [1.0, 0.0, 0.0])


def test_cosine_similarity_matrix_zero_rows():
    sims = cosine_similarity_matrix([[1.0, 0.0], [0.0, 0.0]], [[2.0, 0.0]])
    assert sims.tolist() == [[1.0], [0.0]]
    assert cosine_similarity_matrix([], [[1.0]]).shape == (0, 1)


def test_hinge_loss_examples():
    I = EmbeddingMatrix(np.eye(2))
    assert triplet_loss(I, _triplet([1, 0], [1, 0], [0, 1]), 0.1) == 0.0
    assert triplet_loss(I, _triplet([1, 0], [0, 1], [1, 0]), 0.1) == pytest.approx(1.1)
    zero = EmbeddingMatrix(np.zeros((2, 2)))
    assert triplet_loss(zero, _triplet([1, 0], [0, 1], [1, 0]), 0.1) == pytest.approx(0.1)
    assert tde_loss(zero, _triplet([1, 0], [0, 1], [1, 0]), 0.1) == pytest.approx(0.1)


def test_tse_step_by_hand():
    I = EmbeddingMatrix(np.eye(2))
    updated = tse_sgd_step(I, _triplet([1, 0], [0, 1], [1, 0]), eta=0.01, alpha=0.1)
    assert np.allclose(updated.entries, [[0.98, 0.01], [0.01, 1.00]])


def test_inactive_or_zero_step_keeps_matrix():
    I = EmbeddingMatrix(np.eye(2))
    inactive = _triplet([1, 0], [1, 0], [0, 1])
    assert tse_sgd_step(I, inactive, 0.5, 0.1) is I
    assert tde_sgd_step(I, inactive, 0.5, 0.1) is I
    active = _triplet([1, 0], [0, 1], [1, 0])
    assert np.array_equal(tse_sgd_step(I, active, 0.0, 0.1).entries, I.entries)


def _central_difference(f, W, eps=1e-6):
    grad = np.zeros_like(W)
    for idx in np.ndindex(*W.shape):
        up, down = W.copy(), W.copy()
        up[idx] += eps
        down[idx] -= eps
        grad[idx] = (f(up) - f(down)) / (2 * eps)
    return grad


@pytest.mark.parametrize(
    "violation, gradient",
    [(tse_margin_violation, tse_gradient), (tde_margin_violation, tde_gradient)],
)
def test_gradient_matches_finite_differences(violation, gradient):
    rng = seeded_rng(11)
    for _ in range(100):
        n_out = int(rng.integers(2, 6))
        W = rng.standard_normal((n_out, 10))
        a, p, n = (l2_normalize(rng.standard_normal(10)) for _ in range(3))
        # Margin large enough that the hinge stays active around W.
        alpha = 100.0

        def objective(M):
            return max(0.0, violation(M, a, p, n, alpha))

        numeric = _central_difference(objective, W)
        analytic = gradient(W, a, p, n)
        error = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-12)
        assert error < 1e-4


def test_hinge_loss_dimension_check():
    W = EmbeddingMatrix(np.eye(3))
    with pytest.raises(DimensionMismatchError):
        hinge_loss(W, _triplet([1, 0], [0, 1], [1, 0]), 0.1, Objective.TDE)


def test_project():
    v = np.array([0.6, 0.8])
    assert np.array_equal(project(EmbeddingMatrix(np.eye(2)), v), v)
    assert np.array_equal(project(EmbeddingMatrix(np.zeros((3, 2))), v), np.zeros(3))
    with pytest.raises(DimensionMismatchError):
        project(EmbeddingMatrix(np.eye(3)), v)


def test_project_rows_renormalizes():
    W = EmbeddingMatrix(np.array([[2.0, 0.0], [0.0, 1.0]]))
    X = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert np.allclose(project_rows(W, X, renormalize=False), [[2.0, 0.0], [0.0, 1.0]])
    assert np.allclose(project_rows(W, X), np.eye(2))


def test_normalize_pyramid():
    level = PyramidLevel(0, np.array([[[1.0], [3.0]]]))
    constant = PyramidLevel(1, np.full((2, 2, 1), 5.0))
    scaled = PyramidLevel(2, 100.0 * np.array([[[1.0], [2.0], [6.0]]]))

    out = normalize_pyramid([level, constant, scaled])

    assert out[0].features.ravel().tolist() == [-1.0, 1.0]
    assert out[0].mean.tolist() == [2.0] and out[0].stddev.tolist() == [1.0]
    assert np.all(out[1].features == 0.0)
    assert out[2].features.mean() == pytest.approx(0.0)
    assert out[2].features.std() == pytest.approx(1.0)


def test_normalize_pyramid_empty_level():
    with pytest.raises(DegenerateInputError):
        normalize_pyramid([PyramidLevel(0, np.zeros((0, 0, 1)))])


def test_non_finite_update_is_reported():
    a, p, n = np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([1.0, 0.0])
    with pytest.raises(TrainingDivergenceError):
        sgd_update(np.eye(2), a, p, n, 1e308, 0.1, Objective.TSE)


def _random_triplets(rng, count, dim=6):
    for _ in range(count):
        W = EmbeddingMatrix(rng.standard_normal((4, dim)))
        a, p, n = (l2_normalize(rng.standard_normal(dim)) for _ in range(3))
        yield W, _triplet(a, p, n), float(rng.uniform(0.01, 0.5))


def test_step_is_identity_exactly_when_the_margin_is_met():
    rng = seeded_rng(21)
    satisfied = active = 0
    for W, t, alpha in _random_triplets(rng, 200):
        stepped = tse_sgd_step(W, t, 0.01, alpha)
        if triplet_loss(W, t, alpha) == 0.0:
            satisfied += 1
            assert np.array_equal(stepped.entries, W.entries)
        else:
            active += 1
            assert not np.array_equal(stepped.entries, W.entries)
    assert satisfied > 20
    assert active > 20


def test_step_size_scales_the_update():
    rng = seeded_rng(22)
    checked = 0
    for W, t, alpha in _random_triplets(rng, 100):
        if triplet_loss(W, t, alpha) == 0.0:
            continue
        base = W.entries - tse_sgd_step(W, t, 0.01, alpha).entries
        for c in (0.5, 3.0, 10.0):
            scaled = W.entries - tse_sgd_step(W, t, 0.01 * c, alpha).entries
            assert np.allclose(scaled, c * base, rtol=1e-9, atol=1e-12)
        checked += 1
    assert checked > 20


def test_similarity_is_the_dot_product_of_projections():
    rng = seeded_rng(23)
    for _ in range(100):
        rows, cols = (int(k) for k in rng.integers(1, 12, size=2))
        W = EmbeddingMatrix(rng.standard_normal((rows, cols)))
        a, p = rng.standard_normal(cols), rng.standard_normal(cols)
        bilinear = a @ W.entries.T @ W.entries @ p
        assert bilinear == pytest.approx(project(W, a) @ project(W, p), rel=1e-8, abs=1e-8)
