"""Censoring-aware evaluation: concordance, horizon AUC, ordinality.

Concordance follows Harrell's comparable-pair rule: censored patients can
only serve as the later member of a pair. Tied times are not comparable
unless exactly one member is an event and the other is censored at the
same time, in which case the event member counts as earlier. Tied risks
score 0.5. The horizon AUC uses the plain case/control rule (no IPCW
weighting) so a pair-enumeration oracle can check it exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist
from scipy.stats import spearmanr

from .core import Dataset

DEFAULT_HORIZON_FRACTIONS = (0.25, 0.5, 0.75)


class NoComparablePairsError(ValueError):
    pass


class UndefinedAtHorizonError(ValueError):
    pass


class TooFewUncensoredError(ValueError):
    pass


@dataclass(frozen=True)
class EvalReport:
    ci: float
    auc_at: dict[float, float]
    ordinality: float

    def to_dict(self) -> dict:
        def clean(x):
            return float(x) if math.isfinite(x) else None

        out = {"ci": clean(self.ci)}
        for frac in sorted(self.auc_at):
            out[f"auc_{int(round(frac * 100))}"] = clean(self.auc_at[frac])
        out["ordinality"] = clean(self.ordinality)
        return out


def concordance_index(risks: np.ndarray, events: np.ndarray,
                      times: np.ndarray) -> float:
    """Harrell's concordance index; exact, no approximation.

    A pair (i, j) is comparable iff T_i < T_j and e_i = 1, or T_i = T_j
    with e_i = 1 and e_j = 0. Concordant means risk_i > risk_j; risk ties
    count 0.5.
    """
    risks = np.asarray(risks, dtype=float)
    events = np.asarray(events, dtype=int)
    times = np.asarray(times, dtype=float)
    concordant = 0.0
    comparable = 0
    for i in np.flatnonzero(events == 1):
        later = (times > times[i]) | ((times == times[i]) & (events == 0))
        comparable += int(later.sum())
        concordant += float((risks[i] > risks[later]).sum())
        concordant += 0.5 * float((risks[i] == risks[later]).sum())
    if comparable == 0:
        raise NoComparablePairsError("no comparable pairs in the input")
    return concordant / comparable


def cumulative_dynamic_auc(risks: np.ndarray, events: np.ndarray,
                           times: np.ndarray, horizon: float) -> float:
    """Discrimination between events by `horizon` and survivors past it."""
    risks = np.asarray(risks, dtype=float)
    events = np.asarray(events, dtype=int)
    times = np.asarray(times, dtype=float)
    cases = risks[(times <= horizon) & (events == 1)]
    controls = risks[times > horizon]
    if cases.size == 0 or controls.size == 0:
        raise UndefinedAtHorizonError(
            f"horizon {horizon}: {cases.size} cases, {controls.size} controls")
    wins = (cases[:, None] > controls[None, :]).sum()
    ties = (cases[:, None] == controls[None, :]).sum()
    return (wins + 0.5 * ties) / (cases.size * controls.size)


def embedding_ordinality(embeddings: np.ndarray, events: np.ndarray,
                         times: np.ndarray) -> float:
    """Spearman correlation of embedding distances vs |time differences|.

    Computed over all pairs of uncensored patients; 1.0 means the latent
    space orders patients exactly by time-to-event. Returns NaN when one
    of the pair statistics is constant.
    """
    embeddings = np.asarray(embeddings, dtype=float)
    events = np.asarray(events, dtype=int)
    times = np.asarray(times, dtype=float)
    mask = events == 1
    if mask.sum() < 3:
        raise TooFewUncensoredError(
            f"need >= 3 uncensored patients, got {int(mask.sum())}")
    emb_dist = pdist(embeddings[mask])
    time_dist = pdist(times[mask, None], metric="cityblock")
    rho = spearmanr(emb_dist, time_dist).statistic
    return float(rho)


def horizon_from_fraction(dataset: Dataset, fraction: float) -> float:
    """`fraction` of the maximum observed time in the dataset."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    return fraction * float(dataset.times().max())
