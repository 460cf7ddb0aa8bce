"""Domain types, dataset validation, and time-grid discretization.

Everything here is immutable after construction and safe to share across
workers. `Patient`/`Dataset` are dumb records: they can hold invalid data,
and `validate_dataset` is the single place where invariants are enforced
and reported.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True, eq=False)
class Patient:
    """One subject: opaque id, feature vector, event flag and observed time.

    ``event`` is 1 when the event was observed and 0 when the subject is
    right-censored; ``time`` is the observed follow-up time either way
    (true event time if uncensored, censoring time otherwise).
    """

    id: str
    features: np.ndarray
    event: int
    time: float

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=float))


@dataclass(frozen=True, eq=False)
class Dataset:
    patients: tuple[Patient, ...]
    feature_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "patients", tuple(self.patients))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def __len__(self) -> int:
        return len(self.patients)

    def ids(self) -> list[str]:
        return [p.id for p in self.patients]

    def times(self) -> np.ndarray:
        return np.array([p.time for p in self.patients], dtype=float)

    def events(self) -> np.ndarray:
        return np.array([p.event for p in self.patients], dtype=int)

    def feature_matrix(self) -> np.ndarray:
        return np.stack([p.features for p in self.patients])

    def subset(self, indices: Iterable[int]) -> "Dataset":
        return Dataset(tuple(self.patients[i] for i in indices), self.feature_names)


@dataclass(frozen=True)
class LossConfig:
    """Hyperparameters of the ordinal contrastive loss.

    ``temperature`` scales similarities inside the exponentials, ``lam``
    is the weight given to uncertain pairs (0 drops them, 1 treats them
    as negatives), ``beta`` weights the contrastive term in the total
    training loss.
    """

    temperature: float = 2.0
    lam: float = 0.5
    beta: float = 1.0

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must be in [0, 1], got {self.lam}")
        if not self.beta >= 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")


@dataclass(frozen=True)
class Violation:
    code: str
    patient_id: str | None
    detail: str

    def __str__(self) -> str:
        who = self.patient_id if self.patient_id is not None else "<dataset>"
        return f"{self.code}({who}): {self.detail}"


class ValidationError(ValueError):
    """Raised by `validate_dataset`; carries every violation found."""

    def __init__(self, violations: Sequence[Violation]):
        self.violations = tuple(violations)
        super().__init__("; ".join(str(v) for v in self.violations))

    def codes(self) -> set[str]:
        return {v.code for v in self.violations}


def validate_dataset(raw: Dataset) -> Dataset:
    """Return `raw` unchanged if every invariant holds, else raise.

    The raised `ValidationError` lists all violations, one per offending
    patient, with codes NonFiniteFeature, NegativeTime, BadEventFlag,
    RaggedFeatures, DuplicateId, AllCensored.
    """
    violations: list[Violation] = []
    expected_len = len(raw.feature_names)
    seen: dict[str, int] = {}
    for p in raw.patients:
        if p.features.ndim != 1 or p.features.shape[0] != expected_len:
            violations.append(Violation(
                "RaggedFeatures", p.id,
                f"expected {expected_len} features, got {p.features.shape}"))
        elif not np.all(np.isfinite(p.features)):
            violations.append(Violation(
                "NonFiniteFeature", p.id, "features contain NaN or infinity"))
        if not (math.isfinite(p.time) and p.time >= 0):
            violations.append(Violation(
                "NegativeTime", p.id, f"time must be finite and >= 0, got {p.time}"))
        if p.event not in (0, 1):
            violations.append(Violation(
                "BadEventFlag", p.id, f"event must be 0 or 1, got {p.event!r}"))
        seen[p.id] = seen.get(p.id, 0) + 1
    for pid, count in seen.items():
        if count > 1:
            violations.append(Violation("DuplicateId", pid, f"appears {count} times"))
    if not any(p.event == 1 for p in raw.patients):
        violations.append(Violation(
            "AllCensored", None, "dataset needs at least one uncensored patient"))
    if violations:
        raise ValidationError(violations)
    return raw


class DegenerateTimesWarning(UserWarning):
    """Fewer distinct uncensored times than requested bins; grid shrank."""


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing cut points defining K bins plus a terminal bin.

    Bin k for k < K is [cut_{k-1}, cut_k) with cut_{-1} = 0; bin K is
    [cut_K, infinity). A time exactly on a cut belongs to the later bin.
    """

    cut_points: np.ndarray

    def __post_init__(self):
        cuts = np.asarray(self.cut_points, dtype=float)
        if cuts.ndim != 1 or cuts.size < 1:
            raise ValueError("need at least one cut point")
        if not np.all(cuts > 0):
            raise ValueError("cut points must be positive")
        if not np.all(np.diff(cuts) > 0):
            raise ValueError("cut points must be strictly increasing")
        object.__setattr__(self, "cut_points", cuts)

    @property
    def num_bins(self) -> int:
        """K, the number of cut-defined bins (total bins = K + 1)."""
        return int(self.cut_points.size)

    def bin_index(self, t):
        """Bin of time(s) `t`, in [0, K]; ties on a cut go to the later bin."""
        return np.searchsorted(self.cut_points, t, side="right")


def discretize_time(dataset: Dataset, num_bins: int) -> TimeGrid:
    """Build a TimeGrid from nearest-rank quantiles of uncensored times.

    Cut points are the empirical quantiles at fractions k/num_bins for
    k = 1..num_bins, computed over uncensored patients only (censored
    times underestimate event times), then deduplicated. If fewer than
    `num_bins` distinct uncensored times exist the grid falls back to the
    distinct times themselves and a DegenerateTimesWarning reports the
    actual K.
    """
    if num_bins < 1:
        raise ValueError(f"num_bins must be >= 1, got {num_bins}")
    times = dataset.times()
    events = dataset.events()
    uncensored = np.sort(times[events == 1])
    if uncensored.size == 0:
        raise ValueError("no uncensored patients; validate the dataset first")
    distinct = np.unique(uncensored[uncensored > 0])
    if distinct.size == 0:
        raise ValueError("no positive uncensored time; cannot build a grid")
    if distinct.size < num_bins:
        warnings.warn(
            f"only {distinct.size} distinct uncensored times for "
            f"{num_bins} requested bins; using K={distinct.size}",
            DegenerateTimesWarning,
        )
        return TimeGrid(distinct)
    n = uncensored.size
    ranks = np.ceil(np.arange(1, num_bins + 1) / num_bins * n).astype(int)
    cuts = uncensored[ranks - 1]
    cuts = np.unique(cuts[cuts > 0])
    return TimeGrid(cuts)
