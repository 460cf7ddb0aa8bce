"""Synthetic censored-survival data, CSV ingestion, two-view augmentation,
and weighted batch sampling.

The generator uses exponential event and censoring times because the
expected censoring fraction then has a closed form, P(C < E | x) =
c / (c + rate(x)), which bisection can calibrate against the target.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import Dataset, Patient, validate_dataset

_RISK_MODELS = ("linear", "quadratic")
_SAMPLER_MODES = ("uniform", "event_balanced")


class ParseError(ValueError):
    def __init__(self, message: str, row: int | None = None, col: str | None = None):
        self.row = row
        self.col = col
        where = "" if row is None else f" (row {row}" + ("" if col is None else f", column {col}") + ")"
        super().__init__(message + where)


class CalibrationFailedError(RuntimeError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    n: int
    d_in: int
    risk_model: str = "linear"
    base_rate: float = 0.1
    target_censoring: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.n < 4:
            raise ValueError(f"n must be >= 4, got {self.n}")
        if self.d_in < 1:
            raise ValueError(f"d_in must be >= 1, got {self.d_in}")
        if self.risk_model not in _RISK_MODELS:
            raise ValueError(f"risk_model must be one of {_RISK_MODELS}")
        if self.risk_model == "quadratic" and self.d_in < 2:
            raise ValueError("quadratic risk needs d_in >= 2")
        if not self.base_rate > 0:
            raise ValueError("base_rate must be positive")
        if not 0.0 <= self.target_censoring < 1.0:
            raise ValueError("target_censoring must be in [0, 1)")


@dataclass(frozen=True)
class AugmentConfig:
    noise_std: float = 0.1
    feature_dropout_prob: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if not 0.0 <= self.feature_dropout_prob < 1.0:
            raise ValueError("feature_dropout_prob must be in [0, 1)")


def _expected_censoring(censor_rate: float, event_rates: np.ndarray) -> float:
    return float(np.mean(censor_rate / (censor_rate + event_rates)))


def _calibrate_censor_rate(event_rates: np.ndarray, target: float) -> float:
    lo, hi = 1e-12, 1e12
    if not (_expected_censoring(lo, event_rates) <= target
            <= _expected_censoring(hi, event_rates)):
        raise CalibrationFailedError(
            f"target censoring {target} not bracketed by rates [{lo}, {hi}]")
    for _ in range(200):
        mid = np.sqrt(lo * hi)  # rates span orders of magnitude; bisect in log
        if _expected_censoring(mid, event_rates) < target:
            lo = mid
        else:
            hi = mid
    rate = np.sqrt(lo * hi)
    if abs(_expected_censoring(rate, event_rates) - target) > 0.02:
        raise CalibrationFailedError("bisection did not reach the target")
    return rate


def generate_synthetic(cfg: SynthConfig):
    """Draw a dataset with known ground truth; returns (Dataset, true risks).

    Features are standard normal; the true risk is w.x for a fixed
    unit-norm w (plus 0.5 * x1 * x2 for the quadratic model). Event times
    are exponential with rate base_rate * exp(risk); the censoring rate is
    calibrated so the expected censoring fraction matches the target
    within +/- 0.02.
    """
    rng = np.random.default_rng(cfg.seed)
    w = rng.standard_normal(cfg.d_in)
    w /= np.linalg.norm(w)
    x = rng.standard_normal((cfg.n, cfg.d_in))
    risks = x @ w
    if cfg.risk_model == "quadratic":
        risks = risks + 0.5 * x[:, 0] * x[:, 1]
    event_rates = cfg.base_rate * np.exp(risks)
    event_times = rng.exponential(1.0 / event_rates)
    if cfg.target_censoring == 0.0:
        observed = event_times
        events = np.ones(cfg.n, dtype=int)
    else:
        censor_rate = _calibrate_censor_rate(event_rates, cfg.target_censoring)
        censor_times = rng.exponential(1.0 / censor_rate, size=cfg.n)
        observed = np.minimum(event_times, censor_times)
        events = (event_times <= censor_times).astype(int)
    width = len(str(cfg.n))
    patients = tuple(
        Patient(f"p{i:0{width}d}", x[i], int(events[i]), float(observed[i]))
        for i in range(cfg.n)
    )
    names = tuple(f"x{j + 1}" for j in range(cfg.d_in))
    return validate_dataset(Dataset(patients, names)), risks


def load_csv(path) -> Dataset:
    """Read the `id,time,event,<features...>` schema and validate it."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file") from None
        if len(header) < 3 or [h.strip() for h in header[:3]] != ["id", "time", "event"]:
            raise ParseError(f"header must start with id,time,event; got {header[:3]}")
        feature_names = tuple(h.strip() for h in header[3:])
        patients = []
        for row_num, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, got {len(row)}", row=row_num)
            pid = row[0].strip()
            try:
                time = float(row[1])
            except ValueError:
                raise ParseError(f"bad time {row[1]!r}", row=row_num, col="time") from None
            try:
                event_raw = float(row[2])
            except ValueError:
                raise ParseError(f"bad event {row[2]!r}", row=row_num, col="event") from None
            event = int(event_raw) if event_raw in (0.0, 1.0) else event_raw
            features = np.empty(len(feature_names))
            for j, (name, cell) in enumerate(zip(feature_names, row[3:])):
                try:
                    features[j] = float(cell)
                except ValueError:
                    raise ParseError(f"bad value {cell!r}", row=row_num, col=name) from None
            patients.append(Patient(pid, features, event, time))
    return validate_dataset(Dataset(tuple(patients), feature_names))


def save_csv(dataset: Dataset, path) -> None:
    """Write the CSV schema consumed by `load_csv`; floats via repr (exact)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "time", "event", *dataset.feature_names])
        for p in dataset.patients:
            writer.writerow([p.id, repr(float(p.time)), int(p.event),
                             *(repr(float(v)) for v in p.features)])


def two_view_augment(batch: Sequence[Patient], cfg: AugmentConfig):
    """Two noisy views per patient, labels copied unchanged.

    Rows are interleaved (both views of patient 0, then patient 1, ...).
    Each view adds gaussian noise and then zero-masks features
    independently. Deterministic given cfg.seed.
    """
    if len(batch) < 1:
        raise ValueError("need at least one patient")
    rng = np.random.default_rng(cfg.seed)
    base = np.stack([p.features for p in batch])
    doubled = np.repeat(base, 2, axis=0)
    views = doubled + rng.normal(0.0, cfg.noise_std, size=doubled.shape) \
        if cfg.noise_std > 0 else doubled.copy()
    if cfg.feature_dropout_prob > 0:
        keep = rng.random(doubled.shape) >= cfg.feature_dropout_prob
        views = views * keep
    events = np.repeat([p.event for p in batch], 2)
    times = np.repeat([p.time for p in batch], 2).astype(float)
    return views, events, times


def sample_batch(dataset: Dataset, batch_size: int, weights_mode: str,
                 seed: int, step: int) -> np.ndarray:
    """Indices of one batch, sampled without replacement.

    `event_balanced` weights each patient inversely to the frequency of
    its event class, so heavy censoring no longer starves batches of
    events. Deterministic given (seed, step).
    """
    if weights_mode not in _SAMPLER_MODES:
        raise ValueError(f"weights_mode must be one of {_SAMPLER_MODES}")
    n = len(dataset)
    if batch_size > n:
        raise ValueError(f"batch_size {batch_size} exceeds dataset size {n}")
    rng = np.random.default_rng([seed, step])
    if weights_mode == "uniform":
        return np.sort(rng.choice(n, size=batch_size, replace=False))
    events = dataset.events()
    frac_event = events.mean()
    if frac_event in (0.0, 1.0):
        weights = np.ones(n)
    else:
        weights = np.where(events == 1, 1.0 / frac_event, 1.0 / (1.0 - frac_event))
    weights = weights / weights.sum()
    return np.sort(rng.choice(n, size=batch_size, replace=False, p=weights))
