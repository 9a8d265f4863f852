import math

import numpy as np
import pytest

import oracles
from tournament.core import ModelParams, log_f0
from tournament.design import (
    DesignConstraints,
    bernoulli_divergence,
    design_net_profit,
    design_rank_alpha,
    design_total_effort,
    effort_cap,
    effort_limit,
    effort_multiplier,
    feasibility_interval,
    inverse_design,
    is_attainable,
    normalized_density,
    solve_x_alpha,
    truncated_effort_law,
)
from tournament.equilibrium import game_value, solve_equilibrium
from tournament.errors import DomainError, InvalidReward, NotAttainable, NotFeasible
from tournament.grid import DistributionGrid
from tournament.reward import LinearQuantile, PiecewiseRank, PureRank, constant

P = ModelParams()
KAPPA = P.two_c_sigma2


def test_constraints_validation():
    with pytest.raises(DomainError, match="K >= V0 required"):
        DesignConstraints(V0=1.0, K=0.5)
    assert DesignConstraints(V0=0.2, K=1.0).slack == pytest.approx(0.8)


class TestInverseDesign:
    def tilted(self, a, b):
        return DistributionGrid.from_log_density(lambda x: log_f0(P, x) + a * np.tanh(b * np.asarray(x)), P)

    def test_normalized_density_of_prior(self):
        zeta = normalized_density(DistributionGrid.prior(P), P)
        assert np.allclose(zeta(np.array([0.01, 0.5, 0.99])), 1.0, atol=1e-9)

    def test_round_trip(self):
        mu = self.tilted(1.2, 0.7)
        assert is_attainable(mu, P)
        R = inverse_design(mu, P)
        (eq,) = solve_equilibrium(R, P)
        assert abs(eq.value) < 1e-8
        r = np.linspace(0.01, 0.99, 50)
        assert np.max(np.abs(eq.distribution.quantile(r) - mu.quantile(r))) < 1e-7

    def test_constant_shift(self):
        mu = self.tilted(0.5, 2.0)
        R = inverse_design(mu, P) + 0.75
        assert abs(game_value(R, mu.mean, P) - 0.75) < 1e-8

    def test_gaussian_target(self):
        mu = DistributionGrid.normal(P.x0 + 0.6, P.scale)
        R = inverse_design(mu, P)
        assert isinstance(R, LinearQuantile)
        with pytest.raises(NotAttainable):
            inverse_design(DistributionGrid.normal(0.0, 2.0 * P.scale), P)

    def test_not_attainable(self):
        mu = self.tilted(-1.0, 1.0)
        assert not is_attainable(mu, P)
        with pytest.raises(NotAttainable):
            inverse_design(mu, P)

    def test_feasibility_interval(self):
        mu = self.tilted(1.0, 1.0)
        from tournament.grid import relative_entropy_to_prior

        H = relative_entropy_to_prior(mu, P)
        lo, hi = feasibility_interval(mu, DesignConstraints(0.0, 1.0), P)
        assert lo == 0.0 and abs(hi - (1.0 - KAPPA * H)) < 1e-12
        with pytest.raises(NotFeasible) as info:
            feasibility_interval(mu, DesignConstraints(0.0, KAPPA * H / 2), P)
        assert info.value.entropy == pytest.approx(H)


class TestRankAlpha:
    def test_x_alpha_against_bisection(self):
        for alpha, target in [(0.5, 0.1), (0.2, 0.4), (0.9, 0.01), (0.5, 1e-9)]:
            ref = oracles.bisect(lambda x: oracles.bernoulli_kl(alpha, x) - target, alpha, 1 - 1e-12)
            assert abs(solve_x_alpha(alpha, target) - ref) < 1e-12
            assert abs(bernoulli_divergence(alpha, ref) - oracles.bernoulli_kl(alpha, ref)) < 1e-12

    def test_no_slack_gives_prior(self):
        sol = design_rank_alpha(0.3, DesignConstraints(0.5, 0.5), P)
        assert sol.details["x_alpha"] == 0.3
        assert np.allclose(sol.reward.levels, 0.5)
        assert abs(sol.objective_value - DistributionGrid.prior(P).quantile(0.3)) < 1e-12

    def test_half_and_bindings(self):
        cons = DesignConstraints(0.0, 1.0)
        sol = design_rank_alpha(0.5, cons, P)
        ref = oracles.bisect(lambda x: oracles.bernoulli_kl(0.5, x) - 0.5, 0.5, 1 - 1e-12)
        assert abs(sol.details["x_alpha"] - ref) < 1e-12
        assert sol.binding == {"reservation": True, "budget": True}
        assert abs(sol.details["achieved_quantile"] - sol.objective_value) < 1e-9

    def test_optimal_among_random_feasible(self):
        cons = DesignConstraints(0.0, 1.0)
        alpha = 0.4
        best = design_rank_alpha(alpha, cons, P).objective_value
        rng = np.random.default_rng(21)
        for _ in range(20):
            levels = np.sort(rng.uniform(0, 4, int(rng.integers(2, 9))))
            R = PiecewiseRank(levels)
            # scale the spread down until the budget holds once the value is pinned to V0
            while R.mean() - game_value(R, P.x0, P) > cons.slack:
                levels = levels * 0.8
                R = PiecewiseRank(levels)
            R = R + (cons.V0 - game_value(R, P.x0, P))
            (eq,) = solve_equilibrium(R, P)
            assert eq.distribution.quantile(alpha) <= best + 1e-9

    def test_bad_alpha(self):
        with pytest.raises(DomainError):
            design_rank_alpha(1.0, DesignConstraints(0, 1), P)


class TestNetProfit:
    def test_constant_profit(self):
        sol = design_net_profit(lambda x: np.full_like(np.asarray(x, float), 2.0), 0.3, P)
        assert abs(sol.objective_value - 2.0) < 1e-12
        assert abs(sol.equilibrium.value - 0.3) < 1e-10
        assert abs(sol.details["net_of_transfer"] - 1.7) < 1e-10

    def test_step_profit(self):
        g = lambda x: np.where(np.asarray(x) >= 0.0, 1.0, 0.0)
        sol = design_net_profit(g, 0.0, P, g_breakpoints=(0.0,))
        expected = math.exp(0.5) / (1 + math.exp(0.5))
        assert abs(sol.objective_value - expected) < 1e-9
        assert sol.binding["reservation"]

    def test_smooth_profit_matches_tilt(self):
        g = lambda x: np.tanh(np.asarray(x))
        sol = design_net_profit(g, 0.0, P)
        _, zval = oracles.tilt_mean(lambda y: math.tanh(y) / KAPPA, P.x0, P.scale)
        assert abs(sol.details["log_beta_g"] - math.log(zval)) < 1e-10
        r = np.linspace(0.01, 0.99, 25)
        assert np.max(np.abs(sol.equilibrium.distribution.quantile(r) - sol.details["target"].quantile(r))) < 1e-7

    def test_decreasing_rejected(self):
        with pytest.raises(InvalidReward):
            design_net_profit(lambda x: -np.asarray(x), 0.0, P)


class TestTotalEffort:
    def test_no_slack(self):
        sol = design_total_effort(DesignConstraints(1.0, 1.0), P)
        assert sol.objective_value == 0.0
        assert isinstance(sol.reward, type(constant(1.0)))

    def test_truncated_mean_closed_form(self):
        cons = DesignConstraints(0.0, 1.0)
        lam = effort_multiplier(cons, P)
        for M in (1.0, 3.0, 6.0):
            law = truncated_effort_law(M, cons, P)
            assert abs(law.mean - P.x0 - oracles.effort_truncated(M, lam, P.x0, P.scale)) < 1e-9

    def test_below_cap_and_budget(self):
        cons = DesignConstraints(0.2, 1.2)
        prev = 0.0
        for M in (1.0, 2.0, 4.0):
            sol = design_total_effort(cons, P, M)
            assert prev < sol.objective_value < effort_cap(cons, P)
            assert abs(sol.objective_value - sol.details["target_effort"]) < 1e-7
            assert sol.details["reward_integral"] < cons.K
            assert abs(sol.equilibrium.value - cons.V0) < 1e-8
            prev = sol.objective_value

    def test_default_truncation_near_cap(self):
        cons = DesignConstraints(0.0, 1.0)
        sol = design_total_effort(cons, P)
        assert effort_cap(cons, P) - sol.objective_value < 1e-6
        assert abs(sol.details["reward_integral"] - cons.K) < 1e-6

    def test_limit(self):
        cons = DesignConstraints(0.5, 2.5)
        sol = effort_limit(cons, P)
        assert sol.objective_value == pytest.approx(math.sqrt(2.0))
        assert sol.binding["reservation"]
        assert sol.details["constant_drift"] == pytest.approx(math.sqrt(2.0))

    def test_bad_truncation(self):
        with pytest.raises(DomainError):
            design_total_effort(DesignConstraints(0, 1), P, M=0.0)
