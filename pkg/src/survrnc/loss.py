"""Ordinal contrastive loss over an embedding batch, with analytic gradient.

For every ordered (anchor, positive) pair the loss contrasts the pair's
similarity against the members ranked at least as far from the anchor in
time, weighting censoring-uncertain members by lambda. Similarity is
negative Euclidean distance; the softmax-style denominator is computed
with max-subtraction because sim/temperature can be large-magnitude
negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import LossConfig
from .pairsets import PairSets, delta_bound_matrices, pair_set_masks

# below this batch size the dense (B^3) path beats the sorted path's
# per-anchor overhead; it also stays the reference implementation
_DENSE_CUTOFF = 16


class LengthMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EmbeddingBatch:
    """Latent vectors with aligned (event, time) labels, one row per view."""

    embeddings: np.ndarray
    events: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        emb = np.asarray(self.embeddings, dtype=float)
        events = np.asarray(self.events, dtype=int)
        times = np.asarray(self.times, dtype=float)
        if emb.ndim != 2 or emb.shape[0] < 2:
            raise ValueError(f"need a (B, d) matrix with B >= 2, got {emb.shape}")
        if not np.all(np.isfinite(emb)):
            raise ValueError("embeddings contain non-finite values")
        if events.shape != (emb.shape[0],) or times.shape != (emb.shape[0],):
            raise ValueError("labels must align with embedding rows")
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "times", times)

    @property
    def size(self) -> int:
        return self.embeddings.shape[0]


def similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Negative Euclidean distance; larger means more similar."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise LengthMismatchError(f"shape mismatch: {u.shape} vs {v.shape}")
    return -float(np.linalg.norm(u - v))


def pair_likelihood(batch: EmbeddingBatch, a: int, p: int, sets: PairSets,
                    cfg: LossConfig) -> float:
    """Normalized likelihood of the (a, p) pair against its ranked sets.

    exp(sim(a,p)/tau) over the negative-set sum plus lambda times the
    uncertain-set sum. Always in (0, 1] because p itself sits in the
    negatives.
    """
    if not sets.negatives:
        raise ValueError("negatives must be nonempty (p is always promoted)")
    v = batch.embeddings
    tau = cfg.temperature
    neg = sorted(sets.negatives)
    unc = sorted(sets.uncertains)
    x_neg = np.array([similarity(v[a], v[k]) / tau for k in neg])
    x_p = similarity(v[a], v[p]) / tau
    if cfg.lam > 0 and unc:
        x_unc = np.array([similarity(v[a], v[k]) / tau for k in unc])
        m = max(x_neg.max(), x_unc.max())
        denom = np.exp(x_neg - m).sum() + cfg.lam * np.exp(x_unc - m).sum()
    else:
        m = x_neg.max()
        denom = np.exp(x_neg - m).sum()
    return float(np.exp(x_p - m) / denom)


def total_loss(prognosis: float, survrnc: float, cfg: LossConfig) -> float:
    """Training objective: native prognosis loss plus beta times the contrast."""
    return prognosis + cfg.beta * survrnc


def survrnc_loss(batch: EmbeddingBatch, cfg: LossConfig) -> float:
    """Mean negative log pair likelihood over all ordered (a, p) pairs."""
    value, _ = _loss_and_grad(batch, cfg, want_grad=False)
    return value


def survrnc_loss_grad(batch: EmbeddingBatch, cfg: LossConfig) -> np.ndarray:
    """d loss / d embeddings, one row per embedding row."""
    _, grad = _loss_and_grad(batch, cfg, want_grad=True)
    return grad


def survrnc_loss_and_grad(batch: EmbeddingBatch, cfg: LossConfig):
    """Loss and gradient from one shared pass (the trainer's entry point)."""
    return _loss_and_grad(batch, cfg, want_grad=True)


def _loss_and_grad(batch: EmbeddingBatch, cfg: LossConfig, want_grad: bool):
    if batch.size <= _DENSE_CUTOFF:
        return _loss_and_grad_dense(batch, cfg, want_grad)
    result = _loss_and_grad_sorted(batch, cfg, want_grad)
    if result is None:  # extreme similarity spread underflowed a denominator
        return _loss_and_grad_dense(batch, cfg, want_grad)
    return result


def _loss_and_grad_dense(batch: EmbeddingBatch, cfg: LossConfig, want_grad: bool):
    v = batch.embeddings
    n = batch.size
    tau = cfg.temperature
    diff = v[:, None, :] - v[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    x = -dist / tau  # sim / tau for every (a, k)

    neg, unc = pair_set_masks(batch.events, batch.times)
    active = (neg | unc) if cfg.lam > 0 else neg

    # stable log-denominator: max over active members only, so lambda = 0
    # cannot leak an uncertain member's similarity into the shift
    x_bc = np.broadcast_to(x[:, None, :], (n, n, n))
    m = np.max(x_bc, axis=2, where=active, initial=-np.inf)
    wexp = np.zeros((n, n, n))
    np.subtract(x_bc, m[:, :, None], out=wexp, where=active)
    np.exp(wexp, out=wexp, where=active)  # inactive slots stay 0
    if 0.0 < cfg.lam != 1.0:
        wexp[unc] *= cfg.lam
    denom = wexp.sum(axis=2)
    idx = np.arange(n)
    with np.errstate(invalid="ignore", divide="ignore"):
        terms = -x + m + np.log(denom)
    terms[idx, idx] = 0.0  # p = a is not a pair
    num_pairs = n * (n - 1)
    value = float(terms.sum() / num_pairs)

    if not want_grad:
        return value, None

    safe_denom = denom.copy()
    safe_denom[idx, idx] = 1.0
    wexp /= safe_denom[:, :, None]  # now q[a, p, k]
    wexp[idx, idx, :] = 0.0
    # coefficient of each similarity x[a, k] in the summed loss
    coeff = wexp.sum(axis=1)
    coeff -= 1.0  # the -x[a, p] numerator term, once per valid (a, p)
    coeff[idx, idx] = 0.0
    coeff /= tau * num_pairs

    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(dist[:, :, None] > 0, diff / dist[:, :, None], 0.0)
    grad = -np.einsum("ak,akd->ad", coeff, unit) + np.einsum("ak,akd->kd", coeff, unit)
    return value, grad


def _loss_and_grad_sorted(batch: EmbeddingBatch, cfg: LossConfig, want_grad: bool):
    """O(B^2 log B) path: denominators group by interval bounds.

    For a fixed anchor, the negative set of every pair is a superlevel set
    of the lo bounds (and uncertains of the hi bounds), so denominators
    are suffix sums over bound-sorted similarities, and the per-member
    gradient weights are prefix sums of 1/denominator over threshold-
    sorted pairs. Tie handling matches the dense path exactly because the
    same float comparisons decide membership. Returns None when a
    denominator underflows (caller falls back to the dense path).
    """
    v = batch.embeddings
    n = batch.size
    tau = cfg.temperature
    lam = cfg.lam
    diff = v[:, None, :] - v[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    x = -dist / tau
    lo, hi, theta = delta_bound_matrices(batch.events, batch.times)

    off_diag = ~np.eye(n, dtype=bool)
    m = np.where(off_diag, x, -np.inf).max(axis=1)
    expx = np.exp(x - m[:, None])
    np.fill_diagonal(expx, 0.0)  # k = a never participates
    # self-pairs whose own class is uncertain carry weight 1, not lambda
    promo = lo < theta

    denom = np.empty((n, n))
    for a in range(n):
        lo_order = np.argsort(lo[a], kind="stable")
        lo_sorted = lo[a, lo_order]
        lo_suffix = np.concatenate([
            np.cumsum(expx[a, lo_order][::-1])[::-1], [0.0]])
        s_lo = lo_suffix[np.searchsorted(lo_sorted, theta[a], side="left")]
        if lam > 0:
            hi_order = np.argsort(hi[a], kind="stable")
            hi_sorted = hi[a, hi_order]
            hi_suffix = np.concatenate([
                np.cumsum(expx[a, hi_order][::-1])[::-1], [0.0]])
            s_hi = hi_suffix[np.searchsorted(hi_sorted, theta[a], side="left")]
            d = s_lo + lam * (s_hi - s_lo)
        else:
            d = s_lo.copy()
        d += np.where(promo[a], (1.0 - lam) * expx[a], 0.0)
        denom[a] = d
    if not np.all(denom[off_diag] > 0.0):
        return None

    with np.errstate(divide="ignore"):
        terms = -x + m[:, None] + np.log(denom)
    np.fill_diagonal(terms, 0.0)
    num_pairs = n * (n - 1)
    value = float(terms.sum() / num_pairs)
    if not want_grad:
        return value, None

    inv_d = np.zeros((n, n))
    inv_d[off_diag] = 1.0 / denom[off_diag]
    coeff = np.empty((n, n))
    for a in range(n):
        th_order = np.argsort(theta[a], kind="stable")
        th_sorted = theta[a, th_order]
        th_prefix = np.concatenate([[0.0], np.cumsum(inv_d[a, th_order])])
        r_lo = th_prefix[np.searchsorted(th_sorted, lo[a], side="right")]
        r_hi = th_prefix[np.searchsorted(th_sorted, hi[a], side="right")]
        q_sum = expx[a] * (r_lo + lam * (r_hi - r_lo))
        q_sum += np.where(promo[a], (1.0 - lam) * expx[a] * inv_d[a], 0.0)
        coeff[a] = q_sum - 1.0
    np.fill_diagonal(coeff, 0.0)
    coeff /= tau * num_pairs

    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(dist[:, :, None] > 0, diff / dist[:, :, None], 0.0)
    grad = -np.einsum("ak,akd->ad", coeff, unit) + np.einsum("ak,akd->kd", coeff, unit)
    return value, grad
