from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd

from src.core.errors import ConfigurationError, LoadError, UnknownTemplateError
from src.core.types import Template

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

PROTOCOL_COLUMNS = ["split_index", "role", "template_id"]
ROLES = ("train", "gallery", "probe")


class EvalMode(Enum):
    VERIFICATION = "verification"
    CLOSED_SET = "closed_set_ident"
    OPEN_SET = "open_set_ident"


class Setup(Enum):
    MANUAL = 1
    AUTOMATIC = 2
    SEMI_AUTOMATIC = 3


@dataclass(frozen=True)
class Split:
    index: int
    train: Tuple[str, ...]
    gallery: Tuple[str, ...]
    probe: Tuple[str, ...]

    def validate(self, templates: Mapping[str, Template]) -> None:
        """Known ids, both test roles present, train and test subjects disjoint."""
        if not self.gallery or not self.probe:
            raise ConfigurationError(
                f"Split {self.index} needs gallery and probe templates"
            )
        for tid in self.train + self.gallery + self.probe:
            if tid not in templates:
                raise UnknownTemplateError(f"Split {self.index} references unknown template {tid!r}")
        train_subjects = {templates[t].subject_id for t in self.train}
        test_subjects = {templates[t].subject_id for t in self.gallery + self.probe}
        shared = sorted(train_subjects & test_subjects)
        if shared:
            raise ConfigurationError(
                f"Split {self.index} shares subjects between train and test: {shared[:5]}"
            )


@dataclass(frozen=True)
class Protocol:
    splits: Tuple[Split, ...]
    mode: EvalMode = EvalMode.VERIFICATION


def load_protocol(path: PathLike, mode: EvalMode = EvalMode.VERIFICATION) -> Protocol:
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    absent = [c for c in PROTOCOL_COLUMNS if c not in frame.columns]
    if absent:
        raise LoadError(f"{path}: protocol manifest lacks columns {absent}")
    bad_roles = sorted(set(frame["role"]) - set(ROLES))
    if bad_roles:
        raise LoadError(f"{path}: unknown roles {bad_roles}")
    try:
        frame["split_index"] = frame["split_index"].astype(int)
    except ValueError as exc:
        raise LoadError(f"{path}: split_index must be an integer") from exc

    splits = []
    for index, rows in frame.groupby("split_index", sort=True):
        by_role = {
            role: tuple(rows.loc[rows["role"] == role, "template_id"]) for role in ROLES
        }
        splits.append(Split(index=int(index), **by_role))
    logger.debug("Loaded %d splits from %s", len(splits), path)
    return Protocol(splits=tuple(splits), mode=mode)


def write_protocol(path: PathLike, protocol: Protocol) -> None:
    rows = [
        (split.index, role, tid)
        for split in protocol.splits
        for role in ROLES
        for tid in getattr(split, role)
    ]
    pd.DataFrame(rows, columns=PROTOCOL_COLUMNS).to_csv(path, index=False, lineterminator="\n")


def resolve_setup(
    manual: Optional[Mapping[str, Optional[np.ndarray]]],
    automatic: Optional[Mapping[str, Optional[np.ndarray]]],
    setup: Setup,
) -> Dict[str, Optional[np.ndarray]]:
    """Pick per-template vectors for an evaluation setup.

    Setup 1 uses the manual vectors, setup 2 the automatic ones (``None``
    where nothing was detected) and setup 3 falls back to the manual vector
    wherever the automatic one is absent.
    """
    if setup is Setup.MANUAL:
        if manual is None:
            raise ConfigurationError("Setup 1 needs manual template vectors")
        return dict(manual)
    if automatic is None:
        raise ConfigurationError(f"Setup {setup.value} needs automatic template vectors")
    if setup is Setup.AUTOMATIC:
        return dict(automatic)
    if manual is None:
        raise ConfigurationError("Setup 3 needs manual template vectors")
    resolved: Dict[str, Optional[np.ndarray]] = {}
    for tid in list(automatic) + [t for t in manual if t not in automatic]:
        vector = automatic.get(tid)
        resolved[tid] = vector if vector is not None else manual.get(tid)
    return resolved


def split_subjects(split: Split, templates: Mapping[str, Template]) -> Tuple[List[str], List[str]]:
    return (
        [templates[t].subject_id for t in split.gallery],
        [templates[t].subject_id for t in split.probe],
    )
