import numpy as np
import pandas as pd
import pytest

from src.core.errors import ConfigurationError, LoadError, UnknownTemplateError
from src.core.io import load_templates, write_template_manifest
from src.core.types import Embedding, EmbeddingMatrix, Objective, Template, TrainConfig
from src.evaluation.harness import (
    EvalConfig,
    evaluate_split,
    far_key,
    fpir_key,
    metric_rows,
    project_vectors,
    rank_key,
    run_protocol,
    training_pool,
)
from src.evaluation.io import write_cmc_curve, write_roc_curve, write_split_metrics
from src.evaluation.protocol import (
    EvalMode,
    Protocol,
    Setup,
    Split,
    load_protocol,
    resolve_setup,
    split_subjects,
    write_protocol,
)
from src.pooling.templates import PoolingConfig, PoolingMethod, pool_templates
from src.synth.clusters import ClusterSpec, gen_clusters, gen_protocol, template_subjects


def _corpus(tmp_path, **kwargs):
    dataset, rows = gen_clusters(ClusterSpec(**kwargs))
    write_template_manifest(tmp_path / "templates.csv", rows)
    templates = load_templates(tmp_path / "templates.csv", dataset)
    return templates, template_subjects(rows)


def _template(tid, subject, vector):
    return Template(tid, subject, (Embedding(vector, subject, tid),))


def test_metric_keys():
    assert far_key(0.01) == "tar@far=0.01"
    assert far_key(1e-3) == "tar@far=0.001"
    assert rank_key(5) == "rank-5"
    assert fpir_key(0.1) == "tpir@fpir=0.1"


def test_split_validation():
    templates = {
        "a0": _template("a0", "a", [1.0, 0.0]),
        "b0": _template("b0", "b", [0.0, 1.0]),
        "b1": _template("b1", "b", [0.0, 1.0]),
    }
    Split(0, ("a0",), ("b0",), ("b1",)).validate(templates)
    with pytest.raises(ConfigurationError):
        Split(0, ("b0",), ("b1",), ("a0",)).validate(templates)
    with pytest.raises(ConfigurationError):
        Split(0, ("a0",), (), ("b1",)).validate(templates)
    with pytest.raises(UnknownTemplateError):
        Split(0, ("a0",), ("b0",), ("zz",)).validate(templates)
    assert split_subjects(Split(0, (), ("b0",), ("a0", "b1")), templates) == (["b"], ["a", "b"])


def test_protocol_file(tmp_path):
    protocol = Protocol(
        splits=(Split(0, ("t0",), ("t1",), ("t2", "t3")), Split(1, ("t1",), ("t0",), ("t2",))),
    )
    path = tmp_path / "protocol.csv"
    write_protocol(path, protocol)
    assert path.read_text().splitlines()[0] == "split_index,role,template_id"
    loaded = load_protocol(path, EvalMode.OPEN_SET)
    assert loaded.splits == protocol.splits
    assert loaded.mode is EvalMode.OPEN_SET

    pd.DataFrame([(0, "enroll", "t0")], columns=["split_index", "role", "template_id"]).to_csv(
        path, index=False
    )
    with pytest.raises(LoadError):
        load_protocol(path)


def test_resolve_setup():
    manual = {"t0": np.array([1.0, 0.0]), "t1": np.array([0.0, 1.0])}
    automatic = {"t0": None, "t1": np.array([0.6, 0.8])}
    assert resolve_setup(manual, automatic, Setup.MANUAL)["t0"] is manual["t0"]
    assert resolve_setup(manual, automatic, Setup.AUTOMATIC)["t0"] is None
    semi = resolve_setup(manual, automatic, Setup.SEMI_AUTOMATIC)
    assert semi["t0"].tolist() == [1.0, 0.0]
    assert semi["t1"].tolist() == [0.6, 0.8]
    with pytest.raises(ConfigurationError):
        resolve_setup(None, automatic, Setup.SEMI_AUTOMATIC)
    with pytest.raises(ConfigurationError):
        resolve_setup(manual, None, Setup.AUTOMATIC)


def test_gen_protocol_splits_are_subject_disjoint(tmp_path):
    templates, subjects = _corpus(tmp_path, subjects=15, per_subject=8)
    protocol = gen_protocol(subjects, splits=4, impostor_fraction=0.2, seed=2)
    assert len(protocol.splits) == 4
    assert protocol.mode is EvalMode.OPEN_SET
    for split in protocol.splits:
        split.validate(templates)
        gallery_subjects = {subjects[t] for t in split.gallery}
        assert len(gallery_subjects) == len(split.gallery)
        assert any(subjects[t] not in gallery_subjects for t in split.probe)


def test_separable_dataset_is_perfect(tmp_path):
    templates, subjects = _corpus(tmp_path, subjects=12, per_subject=8, noise_sigma=0.0)
    protocol = gen_protocol(subjects, splits=3, impostor_fraction=0.25)
    results = run_protocol(protocol, templates)

    assert [r.split_index for r in results] == [0, 1, 2]
    for result in results:
        assert result.metrics[far_key(0.01)] == 1.0
        assert result.metrics[rank_key(1)] == 1.0
        assert result.metrics[fpir_key(0.01)] == 1.0
        assert result.metrics["eer"] == 0.0
        assert result.cmc[-1] == 1.0


def test_missing_probe_templates_cost_accuracy():
    templates = {
        "g0": _template("g0", "a", [1.0, 0.0]),
        "g1": _template("g1", "b", [0.0, 1.0]),
        "p0": _template("p0", "a", [0.96, 0.28]),
        "p1": _template("p1", "b", [0.28, 0.96]),
    }
    split = Split(0, (), ("g0", "g1"), ("p0", "p1"))
    pooled = pool_templates(templates)
    full = evaluate_split(split, templates, pooled)
    pooled["p1"] = None
    degraded = evaluate_split(split, templates, pooled)

    assert full.metrics[far_key(0.1)] == 1.0
    assert degraded.metrics[far_key(0.1)] == 0.5
    assert degraded.metrics[rank_key(1)] == 0.5
    assert degraded.matrix.missing[:, 1].all()


def test_closed_set_split_skips_open_set_metrics():
    templates = {
        "g0": _template("g0", "a", [1.0, 0.0]),
        "g1": _template("g1", "b", [0.0, 1.0]),
        "p0": _template("p0", "a", [0.96, 0.28]),
    }
    result = evaluate_split(Split(0, (), ("g0", "g1"), ("p0",)), templates, pool_templates(templates))
    assert result.metrics[rank_key(1)] == 1.0
    assert fpir_key(0.01) not in result.metrics


def test_closed_set_mode_rejects_unenrolled_subjects():
    templates = {
        "g0": _template("g0", "a", [1.0, 0.0]),
        "g1": _template("g1", "b", [0.0, 1.0]),
        "p0": _template("p0", "a", [0.96, 0.28]),
        "q0": _template("q0", "c", [0.6, 0.8]),
    }
    split = Split(0, (), ("g0", "g1"), ("p0", "q0"))
    open_set = evaluate_split(split, templates, pool_templates(templates), mode=EvalMode.OPEN_SET)
    assert open_set.metrics[rank_key(1)] == 1.0
    with pytest.raises(ConfigurationError):
        evaluate_split(split, templates, pool_templates(templates), mode=EvalMode.CLOSED_SET)
    with pytest.raises(ConfigurationError):
        run_protocol(Protocol(splits=(split,), mode=EvalMode.CLOSED_SET), templates)
    assert run_protocol(Protocol(splits=(split,)), templates)[0].metrics == open_set.metrics


def test_threads_do_not_change_results(tmp_path):
    templates, subjects = _corpus(tmp_path, subjects=12, per_subject=8, noise_sigma=0.8, seed=4)
    protocol = gen_protocol(subjects, splits=4, seed=4)
    serial = run_protocol(protocol, templates, threads=1)
    parallel = run_protocol(protocol, templates, threads=3)
    assert metric_rows(serial) == metric_rows(parallel)


def test_pooling_methods_are_selectable(tmp_path):
    templates, subjects = _corpus(
        tmp_path, subjects=12, per_subject=8, noise_sigma=1.0, video_frames=20, seed=6
    )
    protocol = gen_protocol(subjects, splits=2, seed=6)
    media = run_protocol(protocol, templates, EvalConfig(pooling=PoolingConfig(PoolingMethod.MEDIA)))
    plain = run_protocol(protocol, templates, EvalConfig(pooling=PoolingConfig(PoolingMethod.AVERAGE)))
    assert not np.array_equal(media[0].matrix.scores, plain[0].matrix.scores)


def test_trained_projection_per_split(tmp_path):
    templates, subjects = _corpus(tmp_path, subjects=12, per_subject=8, ambient_dim=16)
    protocol = gen_protocol(subjects, splits=2)
    cfg = TrainConfig(output_dim=4, iterations=50)
    results = run_protocol(protocol, templates, objective=Objective.TSE, train_cfg=cfg)
    assert all(np.all(np.isfinite(r.matrix.scores)) for r in results)
    with pytest.raises(ConfigurationError):
        run_protocol(protocol, templates, matrix=EmbeddingMatrix(np.eye(16)), objective=Objective.TSE)


def test_training_pool_holds_only_training_templates(tmp_path):
    templates, subjects = _corpus(tmp_path, subjects=12, per_subject=8)
    split = gen_protocol(subjects, splits=1).splits[0]
    pool = training_pool(split, templates)
    train_subjects = {subjects[t] for t in split.train}
    assert set(pool.subject_ids) == train_subjects
    assert np.allclose(np.linalg.norm(pool.vectors, axis=1), 1.0)


def test_project_vectors_keeps_missing():
    W = EmbeddingMatrix(np.array([[2.0, 0.0]]))
    projected = project_vectors({"a": np.array([0.6, 0.8]), "b": None}, W)
    assert projected["b"] is None
    assert projected["a"].tolist() == [1.0]


def test_curve_files(tmp_path):
    templates = {
        "g0": _template("g0", "a", [1.0, 0.0]),
        "g1": _template("g1", "b", [0.0, 1.0]),
        "p0": _template("p0", "a", [0.96, 0.28]),
    }
    result = evaluate_split(Split(3, (), ("g0", "g1"), ("p0",)), templates, pool_templates(templates))
    write_roc_curve(tmp_path / "roc.csv", result.roc)
    write_cmc_curve(tmp_path / "cmc.csv", result.cmc)
    write_split_metrics(tmp_path / "splits.csv", [3], [result.metrics])

    assert (tmp_path / "roc.csv").read_text().splitlines()[0] == "threshold,far,tar"
    assert (tmp_path / "cmc.csv").read_text().splitlines()[1:] == ["1,1.0", "2,1.0"]
    splits = pd.read_csv(tmp_path / "splits.csv")
    assert splits.loc[0, "split"] == 3
    assert splits.loc[0, rank_key(1)] == 1.0
