from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from src.core.errors import ConfigurationError


def describe(series: pd.Series) -> dict[str, float]:
    """Mean and sample standard deviation of the non-NaN values."""
    values = series.dropna().astype(np.float64)
    n = len(values)
    if n == 0:
        return {"count": 0, "mean": np.nan, "std": np.nan}
    std = float(values.std(ddof=1)) if n > 1 else 0.0
    return {"count": n, "mean": float(values.mean()), "std": std}


def aggregate_splits(per_split: Sequence[Mapping[str, float]]) -> pd.DataFrame:
    """One ``metric,mean,std`` row per metric, in first-seen metric order.

    A metric that was unavailable in some split (absent or NaN) is averaged
    over the splits that report it.
    """
    if not per_split:
        raise ConfigurationError("aggregate_splits needs at least one split")
    frame = pd.DataFrame([dict(split) for split in per_split])
    rows = []
    for metric in frame.columns:
        summary = describe(frame[metric])
        rows.append({"metric": metric, "mean": summary["mean"], "std": summary["std"]})
    return pd.DataFrame(rows, columns=["metric", "mean", "std"])
