import math

import numpy as np
import pytest

from oracles import robin_hood
from tournament.core import ModelParams
from tournament.errors import DomainError, InvalidReward
from tournament.reward import (
    LinearQuantile,
    PiecewiseRank,
    PureRank,
    RankMean,
    StateMean,
    constant,
    discretize_reward,
    eval_reward,
    lorenz_majorizes,
)


class TestEvaluation:
    def test_constant(self):
        R = constant(2.5)
        for x, r, m in [(0.0, 0.0, 0.0), (3.0, 0.4, -1.0), (-2.0, 1.0, 5.0)]:
            assert eval_reward(R, x, r, m) == 2.5

    def test_two_level_convention(self):
        R = PiecewiseRank([0.0, 2.0])
        assert eval_reward(R, 0.0, 0.3, 0.0) == 0.0
        assert eval_reward(R, 0.0, 0.7, 0.0) == 2.0
        assert eval_reward(R, 0.0, 1.0, 0.0) == 2.0

    def test_edge_is_right_continuous(self):
        R = PiecewiseRank([0.0, 1.0, 3.0], [0.0, 0.25, 0.5, 1.0])
        assert eval_reward(R, 0.0, 0.25, 0.0) == 1.0
        assert eval_reward(R, 0.0, 0.5, 0.0) == 3.0
        assert R.breakpoints == (0.25, 0.5)
        assert R.mean() == pytest.approx(0.25 * 1 + 0.5 * 3)

    def test_out_of_range_rank(self):
        with pytest.raises(DomainError):
            eval_reward(constant(1.0), 0.0, 1.2, 0.0)

    def test_decreasing_rejected(self):
        with pytest.raises(InvalidReward):
            PureRank(lambda r: -r)
        with pytest.raises(InvalidReward):
            PiecewiseRank([1.0, 0.0])
        with pytest.raises(InvalidReward):
            RankMean(lambda r, m: r - m)
        with pytest.raises(InvalidReward):
            StateMean(lambda x, m: -x + m)

    def test_bad_edges(self):
        with pytest.raises(InvalidReward):
            PiecewiseRank([0.0, 1.0], [0.0, 0.6, 0.5])

    def test_linear_quantile(self):
        R = LinearQuantile(1.0, 2.0)
        assert eval_reward(R, 0.0, 0.5, 0.0) == 1.0
        assert eval_reward(R, 0.0, 0.975, 0.0) == pytest.approx(1.0 + 2 * 1.959963984540054, abs=1e-12)
        assert not R.bounded
        with pytest.raises(InvalidReward):
            LinearQuantile(0.0, -1.0)

    def test_shift(self):
        R = PureRank(lambda r: r * r) + 1.5
        assert eval_reward(R, 0.0, 0.5, 0.0) == pytest.approx(1.75)

    def test_monotone_along_coordinates(self):
        R = RankMean(lambda r, m: np.tanh(m) * r + m, m_range=(0.0, 5.0))
        rs = np.linspace(0, 1, 101)
        for m in (0.1, 1.0, 3.0):
            assert np.all(np.diff(R.evaluate(0.0, rs, m)) >= 0)
        ms = np.linspace(0, 5, 101)
        assert np.all(np.diff([R.evaluate(0.0, 0.3, m) for m in ms]) >= 0)

    def test_class_tags(self):
        assert PureRank(lambda r: r).is_rank_only
        assert PiecewiseRank([0, 1]).is_rank_only
        assert not RankMean(lambda r, m: r + m).is_rank_only
        assert not StateMean(lambda x, m: x).is_rank_only


class TestLorenz:
    def test_basic_examples(self):
        assert lorenz_majorizes(PiecewiseRank([0.0, 2.0]), PiecewiseRank([1.0, 1.0]))
        assert not lorenz_majorizes(PiecewiseRank([1.0, 1.0]), PiecewiseRank([0.0, 2.0]))
        R = PiecewiseRank([0.0, 0.5, 3.0])
        assert lorenz_majorizes(R, R)

    def test_constant_is_minimal(self):
        R = PureRank(lambda r: r**3)
        assert lorenz_majorizes(R, constant(0.25))

    def test_unequal_totals(self):
        assert not lorenz_majorizes(PiecewiseRank([0.0, 2.0]), constant(1.1))

    def test_table(self):
        ok, (z, a, b) = lorenz_majorizes(PiecewiseRank([0.0, 2.0]), constant(1.0), return_table=True)
        assert ok
        assert np.allclose(z, [0.0, 0.5, 1.0])
        assert np.allclose(a, [0.0, 0.0, 1.0]) and np.allclose(b, [0.0, 0.5, 1.0])

    def test_incomparable(self):
        with pytest.raises(DomainError):
            lorenz_majorizes(RankMean(lambda r, m: r + m), constant(1.0))

    def test_robin_hood_pairs(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            n = int(rng.integers(2, 17))
            levels = np.sort(rng.uniform(-2, 3, n))
            poorer = robin_hood(levels, rng, int(rng.integers(1, 6)))
            assert lorenz_majorizes(PiecewiseRank(levels), PiecewiseRank(poorer))


class TestDiscretize:
    def test_constant(self):
        d = discretize_reward(constant(1.3), 5)
        assert np.allclose(d.levels, 1.3, atol=1e-14)

    def test_linear(self):
        d = discretize_reward(PureRank(lambda r: r), 2)
        assert np.allclose(d.levels, [0.25, 0.75], atol=1e-14)

    def test_partial_sums(self):
        R = PureRank(lambda r: np.exp(2 * r))
        n = 7
        d = discretize_reward(R, n)
        for k in range(1, n + 1):
            assert abs(np.sum(d.levels[:k]) / n - (math.exp(2 * k / n) - 1) / 2) < 1e-12
        assert np.all(np.diff(d.levels) >= 0)

    def test_preserves_lorenz_order(self):
        R = PureRank(lambda r: 3 * r**4)
        Rt = PureRank(lambda r: 0.15 + 0.9 * r)
        assert lorenz_majorizes(R, Rt, tol=1e-9)
        for n in (2, 4, 8):
            assert lorenz_majorizes(discretize_reward(R, n), discretize_reward(Rt, n), tol=1e-9)

    def test_step_input(self):
        R = PureRank(lambda r: np.where(r < 0.3, 0.0, 1.0), breakpoints=(0.3,))
        d = discretize_reward(R, 4)
        assert np.allclose(d.levels, [0.0, 0.8, 1.0, 1.0], atol=1e-12)


def test_on_law_linear_quantile_is_exact():
    from tournament.grid import DistributionGrid

    p = ModelParams()
    mu = DistributionGrid.prior(p)
    R = LinearQuantile(0.5, 2.0)
    x = np.array([-7.0, 0.0, 7.5])
    assert np.allclose(R.on_law(mu)(x), 0.5 + 2.0 * x, atol=1e-12)
