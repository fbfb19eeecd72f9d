from __future__ import annotations

from pathlib import Path
from typing import Sequence, Union

import numpy as np
import pandas as pd

from src.evaluation.metrics import RocPoint

PathLike = Union[str, Path]


def write_roc_curve(path: PathLike, curve: Sequence[RocPoint]) -> None:
    frame = pd.DataFrame(
        [(p.threshold, p.far, p.tar) for p in curve], columns=["threshold", "far", "tar"]
    )
    frame.to_csv(path, index=False, lineterminator="\n")


def write_cmc_curve(path: PathLike, accuracies: np.ndarray) -> None:
    frame = pd.DataFrame(
        {"rank": np.arange(1, len(accuracies) + 1), "accuracy": np.asarray(accuracies)}
    )
    frame.to_csv(path, index=False, lineterminator="\n")


def write_summary(path: PathLike, summary: pd.DataFrame) -> None:
    summary.to_csv(path, index=False, lineterminator="\n")


def write_split_metrics(
    path: PathLike, split_indices: Sequence[int], per_split: Sequence[dict]
) -> None:
    frame = pd.DataFrame([dict(m) for m in per_split])
    frame.insert(0, "split", list(split_indices))
    frame.to_csv(path, index=False, lineterminator="\n")
