import itertools
import math

import numpy as np
import pytest

from survrnc.core import TimeGrid
from survrnc.heads import (
    BinWidthMismatchError,
    HeadOutput,
    deephit_loss,
    deephit_loss_grad,
    mtlr_loss,
    mtlr_loss_grad,
    pmf_from_logits,
    risk_score,
    survival_curve,
)

GRID3 = TimeGrid(np.array([1.0, 2.0, 3.0]))  # K = 3, K+1 = 4 bins
GRID1 = TimeGrid(np.array([10.0]))           # K = 1, K+1 = 2 bins


def out(logits):
    return HeadOutput(np.asarray(logits, dtype=float))


class TestPmfFromLogits:
    def test_uniform(self):
        pmf = pmf_from_logits(out([[0.0, 0.0, 0.0, 0.0]]))
        assert np.allclose(pmf, 0.25, atol=1e-15)

    def test_closed_form_two_bins(self):
        pmf = pmf_from_logits(out([[math.log(2), 0.0]]))
        assert pmf[0] == pytest.approx([2 / 3, 1 / 3], abs=1e-12)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        pmf = pmf_from_logits(out(rng.standard_normal((50, 6)) * 20))
        assert np.abs(pmf.sum(axis=1) - 1.0).max() < 1e-12


class TestSurvivalCurve:
    def test_uniform_pmf(self):
        curve = survival_curve(np.full((1, 4), 0.25), GRID3)
        assert curve.probabilities[0] == pytest.approx([0.75, 0.5, 0.25], abs=1e-12)

    def test_mass_in_terminal_bin(self):
        curve = survival_curve(np.array([[0.0, 0.0, 0.0, 1.0]]), GRID3)
        assert np.allclose(curve.probabilities, 1.0)

    def test_mass_in_first_bin(self):
        curve = survival_curve(np.array([[1.0, 0.0, 0.0, 0.0]]), GRID3)
        assert np.allclose(curve.probabilities, 0.0)

    def test_non_increasing_for_random_logits(self):
        rng = np.random.default_rng(1)
        pmf = pmf_from_logits(out(rng.standard_normal((1000, 4)) * 10))
        curve = survival_curve(pmf, GRID3)
        assert np.all(np.diff(curve.probabilities, axis=1) <= 1e-15)
        assert curve.probabilities.min() >= 0.0
        assert curve.probabilities.max() <= 1.0 + 1e-15


def brute_force_censored_likelihood(pmf_row, time, grid):
    """Enumerate bins consistent with a censoring time: upper edge > T."""
    edges = list(grid.cut_points) + [math.inf]
    return sum(p for p, edge in zip(pmf_row, edges) if edge > time)


class TestMtlrLoss:
    def test_uniform_uncensored_first_bin(self):
        value = mtlr_loss(out([[0.0, 0.0]]), [1], [5.0], GRID1)
        assert value == pytest.approx(-math.log(0.5), abs=1e-12)

    def test_censored_beyond_last_cut(self):
        value = mtlr_loss(out([[0.0, 0.0]]), [0], [11.0], GRID1)
        assert value == pytest.approx(-math.log(0.5), abs=1e-12)

    def test_censored_inside_first_bin_costs_nothing(self):
        grid = TimeGrid(np.array([1.0, 2.0]))
        value = mtlr_loss(out([[0.0, 0.0, 0.0]]), [0], [0.5], grid)
        assert value == pytest.approx(0.0, abs=1e-12)

    def test_censored_matches_brute_force_enumeration(self):
        rng = np.random.default_rng(2)
        for width, grid in ((2, GRID1), (4, GRID3)):
            for _ in range(50):
                logits = rng.standard_normal((1, width)) * 3
                time = float(rng.uniform(0, 5))
                pmf = pmf_from_logits(out(logits))[0]
                expected = -math.log(
                    brute_force_censored_likelihood(pmf, time, grid))
                got = mtlr_loss(out(logits), [0], [time], grid)
                assert got == pytest.approx(expected, abs=1e-12)

    def test_censored_term_never_exceeds_uncensored(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            logits = rng.standard_normal((1, 4)) * 2
            time = float(rng.uniform(0, 4))
            cens = mtlr_loss(out(logits), [0], [time], GRID3)
            uncens = mtlr_loss(out(logits), [1], [time], GRID3)
            assert cens <= uncens + 1e-12

    def test_batch_is_mean(self):
        logits = np.array([[0.5, -0.2, 0.1, 0.3], [1.0, 0.0, -1.0, 0.2]])
        single = [
            mtlr_loss(out(logits[i:i + 1]), [1], [t], GRID3)
            for i, t in enumerate([0.5, 2.5])
        ]
        both = mtlr_loss(out(logits), [1, 1], [0.5, 2.5], GRID3)
        assert both == pytest.approx(np.mean(single), abs=1e-12)

    def test_width_mismatch(self):
        with pytest.raises(BinWidthMismatchError):
            mtlr_loss(out([[0.0, 0.0]]), [1], [1.0], GRID3)

    def test_grad_matches_central_differences(self):
        rng = np.random.default_rng(4)
        logits = rng.standard_normal((5, 4))
        events = np.array([1, 0, 1, 0, 0])
        times = rng.uniform(0, 4, 5)
        grad = mtlr_loss_grad(out(logits), events, times, GRID3)
        fd = _fd_logits(lambda lg: mtlr_loss(out(lg), events, times, GRID3), logits)
        assert np.abs(grad - fd).max() / max(np.abs(fd).max(), 1e-8) < 1e-4


class TestDeephitLoss:
    def test_batch_of_one_has_no_rank_term(self):
        logits = np.array([[0.3, -0.1, 0.2, 0.0]])
        like = mtlr_loss(out(logits), [1], [1.5], GRID3)
        full = deephit_loss(out(logits), [1], [1.5], GRID3, sigma=1.0,
                            rank_weight=0.5)
        assert full == pytest.approx(like, abs=1e-15)

    def test_correct_ordering_beats_exp_zero(self):
        # model F higher for the earlier patient at its own time
        logits = np.array([[3.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 3.0]])
        events = [1, 1]
        times = [0.5, 2.5]
        like = mtlr_loss(out(logits), events, times, GRID3)
        full = deephit_loss(out(logits), events, times, GRID3, sigma=1.0,
                            rank_weight=1.0)
        assert full - like < 1.0  # rank term below exp(0) per admissible pair

    def test_uniform_pmf_equal_incidence_gives_exactly_one(self):
        logits = np.zeros((2, 4))
        events = [1, 1]
        times = [0.5, 2.5]
        like = mtlr_loss(out(logits), events, times, GRID3)
        full = deephit_loss(out(logits), events, times, GRID3, sigma=1.0,
                            rank_weight=1.0)
        assert full - like == pytest.approx(1.0, abs=1e-12)

    def test_rank_term_permutation_invariant(self):
        rng = np.random.default_rng(5)
        logits = rng.standard_normal((6, 4))
        events = np.array([1, 1, 0, 1, 0, 1])
        times = rng.uniform(0, 4, 6)
        base = deephit_loss(out(logits), events, times, GRID3)
        perm = rng.permutation(6)
        shuffled = deephit_loss(out(logits[perm]), events[perm], times[perm], GRID3)
        assert shuffled == pytest.approx(base, rel=1e-12)

    def test_zero_rank_when_no_admissible_pair(self):
        # all censored except one event at the latest time
        logits = np.random.default_rng(6).standard_normal((3, 4))
        events = [0, 0, 1]
        times = [1.0, 2.0, 3.5]
        like = mtlr_loss(out(logits), events, times, GRID3)
        full = deephit_loss(out(logits), events, times, GRID3)
        assert full == pytest.approx(like, abs=1e-15)

    def test_grad_matches_central_differences(self):
        rng = np.random.default_rng(7)
        logits = rng.standard_normal((5, 4))
        events = np.array([1, 0, 1, 1, 0])
        times = rng.uniform(0, 4, 5)
        grad = deephit_loss_grad(out(logits), events, times, GRID3,
                                 sigma=0.3, rank_weight=0.7)
        fd = _fd_logits(
            lambda lg: deephit_loss(out(lg), events, times, GRID3,
                                    sigma=0.3, rank_weight=0.7), logits)
        assert np.abs(grad - fd).max() / max(np.abs(fd).max(), 1e-8) < 1e-4


def _fd_logits(fn, logits, h=1e-6):
    fd = np.zeros_like(logits)
    for idx in np.ndindex(*logits.shape):
        plus, minus = logits.copy(), logits.copy()
        plus[idx] += h
        minus[idx] -= h
        fd[idx] = (fn(plus) - fn(minus)) / (2 * h)
    return fd


class TestRiskScore:
    def test_full_survival_lowest_risk(self):
        curve = survival_curve(np.array([[0.0, 0.0, 0.0, 1.0]]), GRID3)
        assert risk_score(curve)[0] == pytest.approx(-3.0, abs=1e-12)

    def test_no_survival_highest_risk(self):
        curve = survival_curve(np.array([[1.0, 0.0, 0.0, 0.0]]), GRID3)
        assert risk_score(curve)[0] == pytest.approx(0.0, abs=1e-12)

    def test_uniform_pmf(self):
        curve = survival_curve(np.full((1, 4), 0.25), GRID3)
        assert risk_score(curve)[0] == pytest.approx(-1.5, abs=1e-12)

    def test_antitone_in_survival(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            pmf = pmf_from_logits(out(rng.standard_normal((1, 4))))
            lower = survival_curve(pmf, GRID3)
            bumped = np.clip(lower.probabilities + 0.05, 0, 1)
            higher = type(lower)(bumped, lower.cut_points)
            assert risk_score(higher)[0] < risk_score(lower)[0]
