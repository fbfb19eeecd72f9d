import struct

import numpy as np
import pytest

from src.core.errors import (
    DimensionMismatchError,
    LoadError,
    MalformedHeaderError,
    TrailingDataError,
    TruncatedPayloadError,
    UnknownTemplateError,
)
from src.core.io import (
    load_embeddings,
    load_similarity_matrix,
    load_templates,
    write_embeddings,
    write_similarity_matrix,
    write_template_manifest,
)
from src.core.rng import seeded_rng
from src.core.types import EmbeddingDataset, SimilarityMatrix, SourceKind


def _dataset(count=3, dim=4, seed=0):
    rng = seeded_rng(seed)
    return EmbeddingDataset(
        vectors=rng.standard_normal((count, dim)).astype(np.float32),
        subject_ids=[f"s{i % 2}" for i in range(count)],
        media_ids=[f"m{i}" for i in range(count)],
        source_kinds=[SourceKind.IMAGE if i % 2 == 0 else SourceKind.VIDEO_FRAME for i in range(count)],
    )


def _header(count, dim, magic=b"VPE1", version=1):
    return struct.pack("<4sIQI", magic, version, count, dim)


def _label(text):
    raw = text.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def test_load_hand_built_file(tmp_path):
    values = np.arange(6, dtype="<f4")
    body = b"".join(_label(s) + _label(m) + bytes([0]) for s, m in [("a", "x"), ("b", "y")])
    path = tmp_path / "hand.vpe"
    path.write_bytes(_header(2, 3) + values.tobytes() + body)

    dataset = load_embeddings(path)

    assert len(dataset) == 2
    assert dataset.dim == 3
    assert dataset.vectors[1].tolist() == [3.0, 4.0, 5.0]
    assert dataset.subject_ids == ("a", "b")
    assert dataset.media_ids == ("x", "y")


def test_truncated_payload(tmp_path):
    path = tmp_path / "short.vpe"
    path.write_bytes(_header(2, 3) + np.zeros(5, dtype="<f4").tobytes())
    with pytest.raises(TruncatedPayloadError):
        load_embeddings(path)


def test_bad_magic_and_version(tmp_path):
    path = tmp_path / "bad.vpe"
    path.write_bytes(_header(0, 3, magic=b"XXXX"))
    with pytest.raises(MalformedHeaderError):
        load_embeddings(path)
    path.write_bytes(_header(0, 3, version=2))
    with pytest.raises(MalformedHeaderError):
        load_embeddings(path)


def test_header_too_short(tmp_path):
    path = tmp_path / "tiny.vpe"
    path.write_bytes(b"VPE1")
    with pytest.raises(MalformedHeaderError):
        load_embeddings(path)


def test_trailing_bytes(tmp_path):
    path = tmp_path / "trailing.vpe"
    write_embeddings(path, _dataset())
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(TrailingDataError):
        load_embeddings(path)


def test_expected_dimension(tmp_path):
    path = tmp_path / "e.vpe"
    write_embeddings(path, _dataset(dim=4))
    with pytest.raises(DimensionMismatchError):
        load_embeddings(path, expected_dim=5)


def test_written_vectors_are_bitwise_equal(tmp_path):
    dataset = _dataset(count=100, dim=16, seed=3)
    path = tmp_path / "many.vpe"
    write_embeddings(path, dataset)
    loaded = load_embeddings(path, expected_dim=16)
    assert loaded.vectors.tobytes() == dataset.vectors.astype("<f4").tobytes()
    assert loaded.source_kinds == dataset.source_kinds


def test_unicode_labels(tmp_path):
    dataset = EmbeddingDataset(
        vectors=np.ones((1, 2), dtype=np.float32),
        subject_ids=["Zoë"],
        media_ids=["vidéo"],
        source_kinds=[SourceKind.VIDEO_FRAME],
    )
    path = tmp_path / "u.vpe"
    write_embeddings(path, dataset)
    assert load_embeddings(path).subject_ids == ("Zoë",)


def test_templates_and_missing_rows(tmp_path):
    dataset = _dataset(count=3)
    rows = [("t0", "s0", "m0", 0), ("t0", "s0", "m2", 2), ("t1", "s1", "m1", 1), ("t2", "s1", "", None)]
    path = tmp_path / "templates.csv"
    write_template_manifest(path, rows)

    templates = load_templates(path, dataset)

    assert [len(templates[t].members) for t in ("t0", "t1", "t2")] == [2, 1, 0]
    assert templates["t2"].missing
    assert not templates["t0"].missing


def test_template_index_out_of_range(tmp_path):
    path = tmp_path / "templates.csv"
    write_template_manifest(path, [("t0", "s0", "m0", 7)])
    with pytest.raises(UnknownTemplateError):
        load_templates(path, _dataset())


def test_template_media_disagreement(tmp_path):
    path = tmp_path / "templates.csv"
    write_template_manifest(path, [("t0", "s0", "m1", 0)])
    with pytest.raises(LoadError):
        load_templates(path, _dataset())


def test_similarity_csv_keeps_missing(tmp_path):
    matrix = SimilarityMatrix(
        gallery_ids=["g0", "g1"],
        probe_ids=["p0", "p1", "p2"],
        scores=[[0.5, -0.25, 0.1], [1.0, 0.0, 0.3]],
        missing=[[False, True, False], [False, False, False]],
    )
    path = tmp_path / "sim.csv"
    write_similarity_matrix(path, matrix)

    assert path.read_text().splitlines()[0] == "gallery_id,p0,p1,p2"
    assert "MISSING" in path.read_text().splitlines()[1]
    loaded = load_similarity_matrix(path)
    assert loaded.same_order(matrix)
    assert loaded.missing.tolist() == matrix.missing.tolist()
    assert np.array_equal(loaded.scores, matrix.scores)


def test_ordered_scores_put_missing_last():
    matrix = SimilarityMatrix(["g"], ["p0", "p1"], [[0.2, 0.9]], [[False, True]])
    assert matrix.ordered_scores().tolist() == [[0.2, -np.inf]]


def test_rng_determinism():
    assert np.array_equal(seeded_rng(42).random(1000), seeded_rng(42).random(1000))
    assert not np.array_equal(seeded_rng(1).random(10), seeded_rng(2).random(10))


@pytest.mark.parametrize("seed", [-1, 1.5, True, "3"])
def test_rng_rejects_bad_seeds(seed):
    with pytest.raises(ValueError):
        seeded_rng(seed)
