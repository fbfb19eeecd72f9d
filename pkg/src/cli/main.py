"""``tse-face-verify`` command line.

Every command writes its outputs and a ``manifest.json`` holding the
resolved parameters into ``--out-dir``. Input and configuration errors
exit with status 2, numerical failures with status 3.
"""
from __future__ import annotations

import functools
import json
import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

import click
import numpy as np
import pandas as pd

from src.assoc.config import AssocConfig
from src.assoc.engine import run_association
from src.assoc.io import (
    load_detections,
    load_ground_truth,
    write_detections,
    write_event_log,
    write_ground_truth,
    write_identities,
    write_tracklets,
)
from src.assoc.metrics import count_identity_switches
from src.core.errors import ConfigurationError
from src.core.io import (
    load_embeddings,
    load_similarity_matrix,
    load_templates,
    write_embeddings,
    write_similarity_matrix,
    write_template_manifest,
)
from src.core.rng import seeded_rng
from src.core.types import EmbeddingDataset, Objective, SourceKind, TrainConfig
from src.embedding.io import load_matrix, write_matrix, write_training_log
from src.embedding.normalize import l2_normalize_rows
from src.embedding.training import fit_embedding
from src.embedding.triplet import project_rows
from src.evaluation.aggregate import aggregate_splits
from src.evaluation.harness import EvalConfig, project_vectors, run_protocol, training_pool
from src.evaluation.io import (
    write_cmc_curve,
    write_roc_curve,
    write_split_metrics,
    write_summary,
)
from src.evaluation.protocol import EvalMode, Setup, load_protocol, write_protocol
from src.evaluation.similarity import build_similarity_matrix, score_pairs
from src.landmarks.alignment import align_face, normalized_mean_error
from src.landmarks.cascade import CascadeConfig, cascade_predict, cascade_train, stage_errors
from src.landmarks.features import PixelDifferenceFeatures
from src.landmarks.io import (
    load_cascade,
    load_features,
    load_images,
    load_shape,
    load_shape_corpus,
    write_cascade,
    write_features,
    write_images,
    write_shape,
    write_shape_corpus,
)
from src.landmarks.shapes import mean_shape
from src.pooling.fusion import fuse_scores
from src.pooling.templates import (
    PoolingConfig,
    PoolingMethod,
    PoolingOrder,
    pool_templates,
    pooled_dataset,
)
from src.synth.clusters import ClusterSpec, gen_clusters, gen_protocol, template_subjects
from src.synth.scenario import ScenarioOptions, gen_tracking_scenario, load_scenario
from src.synth.shapes import gen_shape_corpus

logger = logging.getLogger(__name__)

EXIT_INPUT_ERROR = 2
EXIT_NUMERICAL_ERROR = 3
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

existing_file = click.Path(exists=True, dir_okay=False, path_type=Path)


@dataclass
class RunConfig:
    command: str
    seed: int
    threads: int
    out_dir: str
    parameters: Dict[str, Any] = field(default_factory=dict)


def _jsonable(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    return value


def write_manifest(run: RunConfig) -> Path:
    path = Path(run.out_dir) / "manifest.json"
    path.write_text(json.dumps(_jsonable(asdict(run)), indent=2, sort_keys=True) + "\n")
    return path


class ToolkitGroup(click.Group):
    """Maps toolkit errors onto exit statuses."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except ArithmeticError as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(EXIT_NUMERICAL_ERROR)
        except (ValueError, KeyError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(EXIT_INPUT_ERROR)


def run_options(func):
    """Shared ``--seed/--threads/--out-dir/--log-level`` handling."""

    @click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
    @click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True)
    @click.option(
        "--out-dir",
        type=click.Path(file_okay=False, path_type=Path),
        default=Path("."),
        show_default=True,
    )
    @click.option(
        "--log-level",
        type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
        default="INFO",
        show_default=True,
    )
    @functools.wraps(func)
    def wrapper(seed: int, threads: int, out_dir: Path, log_level: str, **params):
        logging.basicConfig(level=log_level.upper(), format=LOG_FORMAT, force=True)
        out_dir.mkdir(parents=True, exist_ok=True)
        ctx = click.get_current_context()
        run = RunConfig(
            command=ctx.info_name,
            seed=seed,
            threads=threads,
            out_dir=str(out_dir),
            parameters=dict(params),
        )
        result = func(run=run, out=out_dir, **params)
        write_manifest(run)
        return result

    return wrapper


@click.group(cls=ToolkitGroup)
def cli():
    """Triplet-embedding face verification toolkit."""


def _objective(name: str) -> Optional[Objective]:
    return None if name == "none" else Objective(name)


def _train_config(run: RunConfig, dim: int, margin: float, lr: float, iterations: int, negatives: int) -> TrainConfig:
    cfg = TrainConfig(
        output_dim=dim,
        margin=margin,
        learning_rate=lr,
        negatives_pool=negatives,
        iterations=iterations,
        seed=run.seed,
    )
    run.parameters["train_config"] = asdict(cfg)
    return cfg


def training_options(func):
    for decorator in reversed(
        [
            click.option("--dim", type=int, default=128, show_default=True),
            click.option("--margin", type=float, default=0.1, show_default=True),
            click.option("--lr", type=float, default=0.01, show_default=True),
            click.option("--iterations", type=int, default=5000, show_default=True),
            click.option("--negatives", type=int, default=1000, show_default=True),
        ]
    ):
        func = decorator(func)
    return func


@cli.command()
@click.option("--embeddings", type=existing_file, required=True)
@click.option("--templates", type=existing_file, default=None)
@click.option("--protocol", type=existing_file, default=None)
@click.option("--split", type=int, default=0, show_default=True)
@click.option("--objective", type=click.Choice(["tse", "tde"]), default="tse", show_default=True)
@training_options
@run_options
def train(run, out, embeddings, templates, protocol, split, objective, dim, margin, lr, iterations, negatives):
    """Learn an embedding matrix from a split's training templates."""
    dataset = load_embeddings(embeddings)
    if (templates is None) != (protocol is None):
        raise ConfigurationError("--templates and --protocol must be given together")
    if protocol is not None:
        manifest = load_templates(templates, dataset)
        splits = {s.index: s for s in load_protocol(protocol).splits}
        if split not in splits:
            raise ConfigurationError(f"Protocol has no split {split}")
        pool = training_pool(splits[split], manifest)
    else:
        pool = dataset
    cfg = _train_config(run, dim, margin, lr, iterations, negatives)
    state = fit_embedding(pool, cfg, Objective(objective))
    write_matrix(out / "matrix.vpw", state.matrix)
    write_training_log(out / "training_log.csv", state.log)
    click.echo(f"trained {objective} matrix {state.matrix.rows}x{state.matrix.cols}")


@cli.command()
@click.option("--embeddings", type=existing_file, required=True)
@click.option("--matrix", type=existing_file, required=True)
@click.option("--renormalize/--no-renormalize", default=True, show_default=True)
@run_options
def project(run, out, embeddings, matrix, renormalize):
    """Apply an embedding matrix to every vector of an embedding file."""
    dataset = load_embeddings(embeddings)
    W = load_matrix(matrix)
    projected = project_rows(W, dataset.vectors, renormalize=renormalize)
    write_embeddings(
        out / "projected.vpe",
        EmbeddingDataset(projected, dataset.subject_ids, dataset.media_ids, dataset.source_kinds),
    )


def _pooling_config(method: str, order: str) -> PoolingConfig:
    return PoolingConfig(method=PoolingMethod(method), order=PoolingOrder(order))


def pooling_options(func):
    func = click.option(
        "--order",
        type=click.Choice([o.value for o in PoolingOrder]),
        default=PoolingOrder.NORMALIZE_THEN_AVERAGE.value,
        show_default=True,
    )(func)
    return click.option(
        "--pooling",
        type=click.Choice([m.value for m in PoolingMethod]),
        default=PoolingMethod.MEDIA.value,
        show_default=True,
    )(func)


@cli.command()
@click.option("--embeddings", type=existing_file, required=True)
@click.option("--templates", type=existing_file, required=True)
@click.option("--matrix", type=existing_file, default=None)
@pooling_options
@run_options
def pool(run, out, embeddings, templates, matrix, pooling, order):
    """Pool every template into one vector (template id in the media slot)."""
    dataset = load_embeddings(embeddings)
    manifest = load_templates(templates, dataset)
    pooled = pool_templates(manifest, _pooling_config(pooling, order))
    if matrix is not None:
        pooled = project_vectors(pooled, load_matrix(matrix))
    write_embeddings(out / "pooled.vpe", pooled_dataset(manifest, pooled))


@cli.command()
@click.option("--embeddings", type=existing_file, required=True)
@click.option("--templates", type=existing_file, required=True)
@click.option("--protocol", type=existing_file, default=None)
@click.option("--split", type=int, default=0, show_default=True)
@click.option("--pairs", type=existing_file, default=None, help="CSV of gallery_id,probe_id pairs.")
@click.option("--matrix", type=existing_file, default=None)
@pooling_options
@run_options
def score(run, out, embeddings, templates, protocol, split, pairs, matrix, pooling, order):
    """Score a split's gallery against its probes, or a list of template pairs."""
    dataset = load_embeddings(embeddings)
    manifest = load_templates(templates, dataset)
    pooled = pool_templates(manifest, _pooling_config(pooling, order))
    if matrix is not None:
        pooled = project_vectors(pooled, load_matrix(matrix))
    if pairs is not None:
        listed = pd.read_csv(pairs, dtype=str, keep_default_na=False)
        subjects = {tid: t.subject_id for tid, t in manifest.items()}
        scored = score_pairs(list(zip(listed["gallery_id"], listed["probe_id"])), pooled, subjects)
        listed["score"] = ["MISSING" if s is None else repr(s) for s, _ in scored]
        listed["same_subject"] = [int(same) for _, same in scored]
        listed.to_csv(out / "pair_scores.csv", index=False, lineterminator="\n")
        return
    if protocol is None:
        raise ConfigurationError("score needs --protocol or --pairs")
    splits = {s.index: s for s in load_protocol(protocol).splits}
    if split not in splits:
        raise ConfigurationError(f"Protocol has no split {split}")
    chosen = splits[split]
    write_similarity_matrix(
        out / "similarity.csv", build_similarity_matrix(chosen.gallery, chosen.probe, pooled)
    )


@cli.command()
@click.argument("matrices", nargs=-1, type=existing_file)
@click.option("--weights", type=float, multiple=True, help="One weight per matrix; default all ones.")
@run_options
def fuse(run, out, matrices, weights):
    """Sum similarity matrices that share gallery and probe order."""
    if len(matrices) < 2:
        raise ConfigurationError("fuse needs at least 2 similarity matrices")
    fused = fuse_scores([load_similarity_matrix(m) for m in matrices], list(weights) or None)
    write_similarity_matrix(out / "fused.csv", fused)


@cli.command()
@click.option("--detections", type=existing_file, required=True)
@click.option("--appearances", type=existing_file, default=None)
@click.option("--truth", type=existing_file, default=None)
@click.option("--gamma", type=float, default=0.2, show_default=True)
@click.option("--terminate", type=int, default=4, show_default=True)
@click.option("--detect-every", type=int, default=5, show_default=True)
@click.option("--confidence-min", type=float, default=-1.0, show_default=True)
@click.option("--high-confidence", type=float, default=0.5, show_default=True)
@click.option("--last-frame", type=int, default=None)
@run_options
def associate(run, out, detections, appearances, truth, gamma, terminate, detect_every, confidence_min, high_confidence, last_frame):
    """Track faces through a detection stream and link fragmented tracklets."""
    cfg = AssocConfig(
        overlap_threshold=gamma,
        detect_every=detect_every,
        termination_frames=terminate,
        det_confidence_min=confidence_min,
        high_confidence=high_confidence,
    )
    run.parameters["assoc_config"] = asdict(cfg)
    appearance_data = load_embeddings(appearances) if appearances is not None else None
    engine = run_association(load_detections(detections, appearance_data), cfg, last_frame=last_frame)
    write_tracklets(out / "tracklets.csv", engine.tracklets)
    write_event_log(out / "events.log", engine.events)
    write_identities(out / "identities.csv", engine.identities)
    summary = f"tracklets={len(engine.tracklets)} identities={len(set(engine.identities.values()))}"
    if truth is not None:
        switches = count_identity_switches(load_ground_truth(truth), engine.tracklets, engine.identities)
        summary += f" switches={switches}"
    click.echo(summary)


@cli.command("landmarks-train")
@click.option("--images", type=existing_file, required=True)
@click.option("--shapes", type=existing_file, required=True)
@click.option("--stages", type=int, default=5, show_default=True)
@click.option("--ridge", type=float, default=1e-3, show_default=True)
@click.option("--pairs-per-point", type=int, default=8, show_default=True)
@run_options
def landmarks_train(run, out, images, shapes, stages, ridge, pairs_per_point):
    """Fit a regression cascade; the feature offsets are seeded by --seed."""
    pixels = load_images(images)
    truths = load_shape_corpus(shapes)
    if len(truths) != len(pixels):
        raise ConfigurationError(f"{len(pixels)} images but {len(truths)} shapes")
    cfg = CascadeConfig(stages=stages, ridge=ridge, pairs_per_point=pairs_per_point, feature_seed=run.seed)
    run.parameters["cascade_config"] = asdict(cfg)
    start = mean_shape(truths)
    phi = PixelDifferenceFeatures(len(start), cfg.pairs_per_point, cfg.feature_seed)
    samples = list(zip(pixels, truths))
    model = cascade_train(samples, start, phi, cfg)
    write_cascade(out / "cascade.vpl", model)
    write_features(out / "features.json", phi)
    write_shape(out / "mean_shape.csv", start)
    errors = stage_errors(samples, start, model, phi)
    pd.DataFrame({"stage": range(len(errors)), "rms_error": errors}).to_csv(
        out / "stage_errors.csv", index=False, lineterminator="\n"
    )
    click.echo(f"rms point error {errors[0]:.4f} -> {errors[-1]:.4f}")


@cli.command("landmarks-predict")
@click.option("--images", type=existing_file, required=True)
@click.option("--model", type=existing_file, required=True)
@click.option("--mean-shape", type=existing_file, required=True)
@click.option(
    "--features",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Feature settings written by landmarks-train (default: features.json next to --model).",
)
@click.option("--shapes", type=existing_file, default=None, help="Ground truth for error reporting.")
@run_options
def landmarks_predict(run, out, images, model, mean_shape, features, shapes):
    """Predict landmarks and the aligning similarity transform of every face."""
    pixels = load_images(images)
    stages = load_cascade(model)
    start = load_shape(mean_shape)
    phi = load_features(features or model.parent / "features.json", stages)
    predictions = [cascade_predict(img, start, stages, phi) for img in pixels]
    write_shape_corpus(out / "predictions.csv", predictions)
    transforms = [align_face(p) for p in predictions]
    pd.DataFrame(
        [(i, t.scale, t.rotation, t.tx, t.ty) for i, t in enumerate(transforms)],
        columns=["face_index", "scale", "rotation", "tx", "ty"],
    ).to_csv(out / "alignment.csv", index=False, lineterminator="\n")
    if shapes is not None:
        truths = load_shape_corpus(shapes)
        nme = float(np.mean([normalized_mean_error(p, t) for p, t in zip(predictions, truths)]))
        click.echo(f"normalized mean error {nme:.4f}")


@cli.command()
@click.option("--embeddings", type=existing_file, required=True)
@click.option("--templates", type=existing_file, required=True)
@click.option("--protocol", type=existing_file, required=True)
@click.option("--setup", type=click.IntRange(1, 3), default=2, show_default=True)
@click.option(
    "--mode",
    type=click.Choice([m.value for m in EvalMode]),
    default=EvalMode.VERIFICATION.value,
    show_default=True,
    help="closed_set_ident rejects probes whose subject has no gallery template.",
)
@click.option("--manual-embeddings", type=existing_file, default=None)
@click.option("--manual-templates", type=existing_file, default=None)
@click.option("--objective", type=click.Choice(["none", "tse", "tde"]), default="none", show_default=True)
@click.option("--matrix", type=existing_file, default=None)
@click.option("--renormalize/--no-renormalize", default=True, show_default=True)
@pooling_options
@training_options
@run_options
def evaluate(run, out, embeddings, templates, protocol, setup, mode, manual_embeddings, manual_templates, objective, matrix, renormalize, pooling, order, dim, margin, lr, iterations, negatives):
    """Run the protocol and report TAR@FAR, CMC and TPIR@FPIR over splits."""
    dataset = load_embeddings(embeddings)
    manifest = load_templates(templates, dataset)
    manual = None
    if (manual_embeddings is None) != (manual_templates is None):
        raise ConfigurationError("--manual-embeddings and --manual-templates go together")
    if manual_templates is not None:
        manual = load_templates(manual_templates, load_embeddings(manual_embeddings))
    config = EvalConfig(
        setup=Setup(setup),
        pooling=_pooling_config(pooling, order),
        renormalize=renormalize,
    )
    train_cfg = None
    if _objective(objective) is not None:
        train_cfg = _train_config(run, dim, margin, lr, iterations, negatives)
    results = run_protocol(
        load_protocol(protocol, EvalMode(mode)),
        manifest,
        config,
        manual_templates=manual,
        matrix=load_matrix(matrix) if matrix is not None else None,
        objective=_objective(objective),
        train_cfg=train_cfg,
        threads=run.threads,
    )
    per_split = [r.metrics for r in results]
    write_split_metrics(out / "splits.csv", [r.split_index for r in results], per_split)
    for result in results:
        if result.roc:
            write_roc_curve(out / f"roc_split{result.split_index}.csv", result.roc)
        if result.cmc is not None:
            write_cmc_curve(out / f"cmc_split{result.split_index}.csv", result.cmc)
    summary = aggregate_splits(per_split)
    write_summary(out / "summary.csv", summary)
    for row in summary.itertuples(index=False):
        click.echo(f"{row.metric}: {row.mean:.4f} +/- {row.std:.4f}")


@cli.command()
@click.argument("split_files", nargs=-1, type=existing_file, required=True)
@run_options
def report(run, out, split_files):
    """Aggregate per-split metric files into one mean/std summary."""
    frames = [pd.read_csv(path) for path in split_files]
    rows: List[Dict[str, float]] = [
        {k: v for k, v in record.items() if k != "split"}
        for frame in frames
        for record in frame.to_dict("records")
    ]
    summary = aggregate_splits(rows)
    write_summary(out / "report.csv", summary)
    for row in summary.itertuples(index=False):
        click.echo(f"{row.metric}: {row.mean:.4f} +/- {row.std:.4f}")


@cli.command("synth-clusters")
@click.option("--subjects", type=int, default=20, show_default=True)
@click.option("--per-subject", type=int, default=40, show_default=True)
@click.option("--dim", type=int, default=64, show_default=True)
@click.option("--intrinsic-dim", type=int, default=8, show_default=True)
@click.option("--noise", type=float, default=0.25, show_default=True)
@click.option("--media", type=int, default=4, show_default=True)
@click.option("--templates-per-subject", type=int, default=2, show_default=True)
@click.option("--video-frames", type=int, default=0, show_default=True)
@click.option("--splits", type=int, default=10, show_default=True)
@click.option("--impostor-fraction", type=float, default=0.2, show_default=True)
@run_options
def synth_clusters(run, out, subjects, per_subject, dim, intrinsic_dim, noise, media, templates_per_subject, video_frames, splits, impostor_fraction):
    """Write a synthetic embedding file, template manifest and protocol."""
    spec = ClusterSpec(
        subjects=subjects,
        per_subject=per_subject,
        ambient_dim=dim,
        intrinsic_dim=intrinsic_dim,
        noise_sigma=noise,
        media_per_subject=media,
        seed=run.seed,
        templates_per_subject=templates_per_subject,
        video_frames=video_frames,
    )
    dataset, rows = gen_clusters(spec)
    write_embeddings(out / "embeddings.vpe", dataset)
    write_template_manifest(out / "templates.csv", rows)
    protocol = gen_protocol(
        template_subjects(rows), splits=splits, impostor_fraction=impostor_fraction, seed=run.seed
    )
    write_protocol(out / "protocol.csv", protocol)


@cli.command("synth-scenario")
@click.argument("script", type=existing_file)
@click.option("--confidence-noise", type=float, default=0.0, show_default=True)
@click.option("--appearance-dim", type=int, default=16, show_default=True)
@run_options
def synth_scenario(run, out, script, confidence_noise, appearance_dim):
    """Render a scenario script into detections and ground truth."""
    generated = gen_tracking_scenario(
        load_scenario(script), ScenarioOptions(confidence_noise=confidence_noise, seed=run.seed)
    )
    refs = generated.appearance_refs
    used = [r for r in refs if r is not None]
    write_detections(out / "detections.csv", generated.detections, refs if used else None)
    write_ground_truth(out / "truth.csv", generated.truth)
    if used:
        count = max(used) + 1
        vectors = l2_normalize_rows(seeded_rng(run.seed).standard_normal((count, appearance_dim)))
        write_embeddings(
            out / "appearances.vpe",
            EmbeddingDataset(
                vectors,
                [f"ref{i}" for i in range(count)],
                [f"ref{i}" for i in range(count)],
                [SourceKind.IMAGE] * count,
            ),
        )


@cli.command("synth-shapes")
@click.option("--count", type=int, default=200, show_default=True)
@click.option("--image-size", type=int, default=64, show_default=True)
@run_options
def synth_shapes(run, out, count, image_size):
    """Write a synthetic landmark corpus (images.npy and shapes.csv)."""
    corpus = gen_shape_corpus(count=count, image_size=image_size, seed=run.seed)
    write_images(out / "images.npy", corpus.images)
    write_shape_corpus(out / "shapes.csv", corpus.shapes)


def main():
    cli(prog_name="tse-face-verify")


if __name__ == "__main__":
    main()
