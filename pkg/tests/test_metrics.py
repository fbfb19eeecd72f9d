import numpy as np
import pandas as pd
import pytest

from src.core.errors import ConfigurationError, MetricUnavailableError, UnknownTemplateError
from src.core.types import SimilarityMatrix
from src.evaluation.aggregate import aggregate_splits, describe
from src.evaluation.metrics import (
    cmc_curve,
    equal_error_rate,
    roc_curve,
    roc_from_arrays,
    tar_at_far,
    tpir_at_fpir,
)
from src.evaluation.similarity import build_similarity_matrix, matrix_pairs, score_pairs


def test_roc_hand_sweep():
    curve = roc_curve([(0.9, True), (0.4, True), (0.6, False), (0.1, False)])
    assert [(p.threshold, p.far, p.tar) for p in curve] == [
        (0.9, 0.0, 0.5),
        (0.6, 0.5, 0.5),
        (0.4, 0.5, 1.0),
        (0.1, 1.0, 1.0),
    ]
    assert tar_at_far(curve, 0.5) == 1.0
    assert tar_at_far(curve, 0.0) == 0.5
    assert tar_at_far(curve, 1.0) == 1.0


def test_roc_separated_and_identical_scores():
    separated = roc_curve([(0.9, True), (0.8, True), (0.1, False)])
    assert tar_at_far(separated, 0.0) == 1.0
    same = roc_curve([(0.5, True), (0.5, False), (0.5, True)])
    assert [(p.far, p.tar) for p in same] == [(1.0, 1.0)]


def test_roc_missing_is_never_accepted():
    curve = roc_curve([(None, True), (0.7, True), (0.2, False)])
    assert max(p.tar for p in curve) == 0.5
    assert tar_at_far(curve, 1.0) == 0.5


def test_roc_needs_both_classes():
    with pytest.raises(MetricUnavailableError):
        roc_curve([(0.5, True), (0.2, True)])
    with pytest.raises(MetricUnavailableError):
        roc_curve([(0.5, False)])
    with pytest.raises(ConfigurationError):
        roc_from_arrays([np.nan, 0.1], [True, False])


def test_equal_error_rate():
    perfect = roc_curve([(0.9, True), (0.1, False)])
    assert equal_error_rate(perfect) == 0.0
    curve = roc_curve([(0.9, True), (0.4, True), (0.6, False), (0.1, False)])
    assert equal_error_rate(curve) == 0.5


def test_cmc_hand_ranking():
    # Gallery rows; p1 scores g0 at 0.95, above its mate g1 at 0.1.
    matrix = SimilarityMatrix(["g0", "g1"], ["p0", "p1"], [[0.9, 0.95], [0.8, 0.1]])
    assert cmc_curve(matrix, ["a", "b"], ["a", "b"]).tolist() == [0.5, 1.0]


def test_cmc_identity_and_missing_column():
    identity = SimilarityMatrix(["g0", "g1", "g2"], ["p0", "p1", "p2"], np.eye(3))
    assert cmc_curve(identity, ["a", "b", "c"], ["a", "b", "c"])[0] == 1.0

    missing = np.zeros((3, 3), dtype=bool)
    missing[:, 1] = True
    partial = SimilarityMatrix(identity.gallery_ids, identity.probe_ids, np.eye(3), missing)
    assert cmc_curve(partial, ["a", "b", "c"], ["a", "b", "c"]).tolist() == pytest.approx(
        [2 / 3, 2 / 3, 2 / 3]
    )


def test_cmc_ties_follow_gallery_order():
    matrix = SimilarityMatrix(["g0", "g1"], ["p0"], [[0.5], [0.5]])
    assert cmc_curve(matrix, ["x", "a"], ["a"]).tolist() == [0.0, 1.0]
    assert cmc_curve(matrix, ["a", "x"], ["a"]).tolist() == [1.0, 1.0]


def test_cmc_closed_set_rejects_unenrolled_probe():
    matrix = SimilarityMatrix(["g0"], ["p0"], [[0.5]])
    with pytest.raises(ConfigurationError):
        cmc_curve(matrix, ["a"], ["b"])


def test_tpir_equals_rank_one_when_impostors_score_low():
    scores = np.array(
        [
            [0.9, 0.2, 0.7, 0.1],
            [0.3, 0.8, 0.75, 0.15],
        ]
    )
    matrix = SimilarityMatrix(["g0", "g1"], ["p0", "p1", "p2", "p3"], scores)
    gallery, probes = ["a", "b"], ["a", "b", "a", "z"]
    rates = tpir_at_fpir(matrix, gallery, probes, (0.01, 0.1))
    # p2 ranks its mate second; the impostor p3 tops out at 0.15.
    assert rates[0.01] == pytest.approx(2 / 3)
    assert rates[0.1] == pytest.approx(2 / 3)


def test_tpir_needs_impostors_and_genuine_probes():
    matrix = SimilarityMatrix(["g0"], ["p0", "p1"], [[0.5, 0.4]])
    with pytest.raises(MetricUnavailableError):
        tpir_at_fpir(matrix, ["a"], ["a", "a"])
    with pytest.raises(MetricUnavailableError):
        tpir_at_fpir(matrix, ["a"], ["x", "y"])


def _random_case(rng, closed_set):
    G = int(rng.integers(1, 21))
    P = int(rng.integers(1, 51))
    subjects = [f"s{i}" for i in range(max(1, G // 2 + 1))]
    gallery = [subjects[int(rng.integers(len(subjects)))] for _ in range(G)]
    enrolled = sorted(set(gallery))
    if closed_set:
        probes = [enrolled[int(rng.integers(len(enrolled)))] for _ in range(P)]
    else:
        P = max(P, 2)
        probes = [enrolled[0], "impostor0"] + [
            enrolled[int(rng.integers(len(enrolled)))] if rng.random() < 0.6 else f"impostor{k}"
            for k in range(P - 2)
        ]
    scores = np.round(rng.uniform(-1, 1, size=(G, P)), 1)
    missing = rng.random((G, P)) < 0.1
    matrix = SimilarityMatrix([f"g{i}" for i in range(G)], [f"p{j}" for j in range(P)], scores, missing)
    return matrix, gallery, probes


def _brute_order(matrix, j):
    column = matrix.scores[:, j]
    return sorted(
        range(matrix.shape[0]),
        key=lambda g: (bool(matrix.missing[g, j]), -column[g] if not matrix.missing[g, j] else 0.0, g),
    )


def test_roc_matches_brute_force():
    rng = np.random.default_rng(100)
    checked = 0
    for _ in range(200):
        matrix, gallery, probes = _random_case(rng, closed_set=False)
        values, genuine, missing = matrix_pairs(matrix, gallery, probes)
        if genuine.all() or not genuine.any():
            continue
        curve = roc_from_arrays(values, genuine, missing)
        finite = ~missing
        thresholds = sorted(set(values[finite].tolist()), reverse=True)
        assert [p.threshold for p in curve] == thresholds
        for point in curve:
            accepted = finite & (values >= point.threshold)
            assert point.tar == (accepted & genuine).sum() / genuine.sum()
            assert point.far == (accepted & ~genuine).sum() / (~genuine).sum()
        for target in (0.0, 0.01, 0.1, 0.5, 1.0):
            brute = max(
                [p.tar for p in curve if p.far <= target],
                default=0.0,
            )
            assert tar_at_far(curve, target) == brute
        checked += 1
    assert checked > 100


def test_cmc_matches_brute_force():
    rng = np.random.default_rng(200)
    for _ in range(200):
        matrix, gallery, probes = _random_case(rng, closed_set=True)
        curve = cmc_curve(matrix, gallery, probes)
        G, P = matrix.shape
        for k in range(1, G + 1):
            hits = 0
            for j in range(P):
                if matrix.missing[:, j].all():
                    continue
                top = _brute_order(matrix, j)[:k]
                if any(gallery[g] == probes[j] for g in top):
                    hits += 1
            assert curve[k - 1] == hits / P
        assert np.all(np.diff(curve) >= 0)
        if not any(matrix.missing[:, j].all() for j in range(P)):
            assert curve[-1] == 1.0


def test_tpir_matches_brute_force():
    rng = np.random.default_rng(300)
    targets = (0.0, 0.01, 0.1, 0.5)
    for _ in range(200):
        matrix, gallery, probes = _random_case(rng, closed_set=False)
        rates = tpir_at_fpir(matrix, gallery, probes, targets)
        enrolled = set(gallery)
        genuine = [j for j, s in enumerate(probes) if s in enrolled]
        impostors = [j for j, s in enumerate(probes) if s not in enrolled]
        finite_values = matrix.scores[~matrix.missing].tolist()
        candidates = [np.inf] + sorted(set(finite_values))

        def top_entry(j):
            order = _brute_order(matrix, j)
            first = order[0]
            return first, (None if matrix.missing[first, j] else matrix.scores[first, j])

        points = []
        for tau in candidates:
            false_alarms = 0
            for j in impostors:
                _, score = top_entry(j)
                if score is not None and score >= tau:
                    false_alarms += 1
            true_hits = 0
            for j in genuine:
                first, score = top_entry(j)
                if score is not None and score >= tau and gallery[first] == probes[j]:
                    true_hits += 1
            points.append((false_alarms / len(impostors), true_hits / len(genuine)))
        for target in targets:
            assert rates[target] == max(t for f, t in points if f <= target)


def _transformed(matrix):
    return SimilarityMatrix(
        matrix.gallery_ids, matrix.probe_ids, np.exp(3.0 * matrix.scores) - 2.0, matrix.missing
    )


def test_metrics_ignore_strictly_increasing_transforms():
    rng = np.random.default_rng(400)
    targets = (0.0, 0.01, 0.1, 0.5)
    for _ in range(100):
        matrix, gallery, probes = _random_case(rng, closed_set=False)
        warped = _transformed(matrix)
        values, genuine, missing = matrix_pairs(matrix, gallery, probes)
        if genuine.all() or not genuine.any():
            continue
        before = roc_from_arrays(values, genuine, missing)
        after = roc_from_arrays(*matrix_pairs(warped, gallery, probes))
        assert [(p.far, p.tar) for p in before] == [(p.far, p.tar) for p in after]
        for target in targets:
            assert tar_at_far(before, target) == tar_at_far(after, target)
        assert tpir_at_fpir(matrix, gallery, probes, targets) == tpir_at_fpir(warped, gallery, probes, targets)

    for _ in range(100):
        matrix, gallery, probes = _random_case(rng, closed_set=True)
        assert np.array_equal(
            cmc_curve(matrix, gallery, probes), cmc_curve(_transformed(matrix), gallery, probes)
        )


def _drop_mate_score(rng, matrix, gallery, probes):
    """Mark one finite mated score MISSING; None when there is none."""
    mated = [
        (g, j)
        for g in range(matrix.shape[0])
        for j in range(matrix.shape[1])
        if gallery[g] == probes[j] and not matrix.missing[g, j]
    ]
    if not mated:
        return None
    g, j = mated[int(rng.integers(len(mated)))]
    missing = matrix.missing.copy()
    missing[g, j] = True
    return SimilarityMatrix(matrix.gallery_ids, matrix.probe_ids, matrix.scores, missing)


def test_missing_mate_scores_never_help():
    rng = np.random.default_rng(500)
    targets = (0.0, 0.01, 0.1, 0.5, 1.0)
    for _ in range(200):
        matrix, gallery, probes = _random_case(rng, closed_set=False)
        degraded = _drop_mate_score(rng, matrix, gallery, probes)
        if degraded is None:
            continue
        values, genuine, missing = matrix_pairs(matrix, gallery, probes)
        if not (~genuine).any():
            continue
        before = roc_from_arrays(values, genuine, missing)
        after = roc_from_arrays(*matrix_pairs(degraded, gallery, probes))
        for target in targets:
            assert tar_at_far(after, target) <= tar_at_far(before, target)
        rates = tpir_at_fpir(degraded, gallery, probes, targets)
        for target, rate in tpir_at_fpir(matrix, gallery, probes, targets).items():
            assert rates[target] <= rate

    for _ in range(200):
        matrix, gallery, probes = _random_case(rng, closed_set=True)
        degraded = _drop_mate_score(rng, matrix, gallery, probes)
        if degraded is None:
            continue
        assert np.all(cmc_curve(degraded, gallery, probes) <= cmc_curve(matrix, gallery, probes))


def test_similarity_matrix_from_pooled_vectors():
    pooled = {"g0": np.array([1.0, 0.0]), "g1": np.array([0.0, 1.0]), "p0": np.array([1.0, 0.0]), "p1": None}
    matrix = build_similarity_matrix(["g0", "g1"], ["p0", "p1"], pooled)
    assert matrix.scores[:, 0].tolist() == [1.0, 0.0]
    assert matrix.missing.tolist() == [[False, True], [False, True]]
    with pytest.raises(UnknownTemplateError):
        build_similarity_matrix(["g0"], ["nobody"], pooled)


def test_score_pairs():
    pooled = {"g0": np.array([1.0, 0.0]), "p0": np.array([0.6, 0.8]), "p1": None}
    subjects = {"g0": "a", "p0": "a", "p1": "b"}
    scored = score_pairs([("g0", "p0"), ("g0", "p1")], pooled, subjects)
    assert scored[0][0] == pytest.approx(0.6)
    assert scored[0][1] is True
    assert scored[1] == (None, False)


def test_aggregate_splits():
    summary = aggregate_splits([{"rank-1": 0.9, "eer": 0.1}, {"rank-1": 0.95, "eer": 0.1}])
    rows = summary.set_index("metric")
    assert list(summary.columns) == ["metric", "mean", "std"]
    assert rows.loc["rank-1", "mean"] == pytest.approx(0.925)
    assert rows.loc["rank-1", "std"] == pytest.approx(0.0354, abs=1e-4)
    assert rows.loc["eer", "std"] == 0.0


def test_aggregate_single_split_and_empty():
    summary = aggregate_splits([{"rank-1": 0.8}])
    assert summary.loc[0, "mean"] == 0.8
    assert summary.loc[0, "std"] == 0.0
    with pytest.raises(ConfigurationError):
        aggregate_splits([])


def test_describe_skips_nan():
    stats = describe(pd.Series([0.5, np.nan, 0.7]))
    assert stats["count"] == 2
    assert stats["mean"] == pytest.approx(0.6)
