import math

import numpy as np
import pytest
from scipy import integrate as spi

from tournament.best_response import beta_of, best_response, objective, optimal_drift, reward_tilt
from tournament.core import ModelParams, log_f0
from tournament.design import DesignConstraints, effort_limit
from tournament.equilibrium import solve_equilibrium
from tournament.errors import UnboundedValue
from tournament.grid import DistributionGrid
from tournament.reward import PiecewiseRank, PureRank, StateMean, constant

P = ModelParams()


def mgf_beta(t):
    """E exp(t Z) for standard normal Z, by quadrature."""
    val, _ = spi.quad(lambda z: math.exp(t * z - 0.5 * z * z) / math.sqrt(2 * math.pi), -40, 40, epsabs=1e-14, epsrel=1e-12, points=[0.0])
    return val


class TestBeta:
    def test_constant(self):
        mu = DistributionGrid.prior(P)
        assert abs(beta_of(constant(1.3), mu, P) - math.exp(1.3 / 2)) < 1e-13

    def test_linear_state(self):
        R = StateMean(lambda x, m: x)
        mu = DistributionGrid.prior(P)
        assert abs(beta_of(R, mu, P) - math.exp(1 / 8)) < 1e-12
        assert abs(beta_of(R, mu, P) - mgf_beta(0.5)) < 1e-12

    def test_rank_reward_at_equilibrium(self):
        R = PureRank(lambda r: 2 * r)
        (eq,) = solve_equilibrium(R, P)
        assert abs(beta_of(R, eq.distribution, P) - 1 / (1 - math.exp(-1))) < 1e-10

    def test_superlinear_is_infinite(self):
        R = StateMean(lambda x, m: x**3)
        mu = DistributionGrid.prior(P)
        assert beta_of(R, mu, P) == math.inf
        with pytest.raises(UnboundedValue):
            best_response(R, mu, P)
        with pytest.raises(UnboundedValue):
            optimal_drift(R, mu, P)

    def test_log_beta(self):
        mu = DistributionGrid.prior(P)
        assert beta_of(constant(0.8), mu, P, log=True) == pytest.approx(0.4, abs=1e-14)


class TestBestResponse:
    def test_constant(self):
        mu = DistributionGrid.prior(P)
        br = best_response(constant(-0.7), mu, P)
        assert abs(br.value + 0.7) < 1e-13
        assert np.max(np.abs(br.density.q_values - mu.q_values)) < 1e-8

    def test_gaussian_tilt(self):
        R = StateMean(lambda x, m: x)
        br = best_response(R, DistributionGrid.prior(P), P)
        assert abs(br.value - 0.25) < 1e-12
        assert abs(br.density.mean - 0.5) < 1e-12
        r = np.array([0.1, 0.5, 0.9])
        assert np.max(np.abs(br.density.quantile(r) - (0.5 + DistributionGrid.prior(P).quantile(r)))) < 1e-8

    def test_value_identity(self):
        for R in (PureRank(lambda r: 2 * r), PiecewiseRank([0.0, 1.0, 1.5]), StateMean(lambda x, m: np.tanh(x))):
            mu_t = DistributionGrid.normal(0.3, 1.2)
            br = best_response(R, mu_t, P)
            assert br.value == P.two_c_sigma2 * br.log_beta
            assert abs(objective(R, mu_t, br.density, P) - br.value) < 1e-6

    def test_effort_limit_value(self):
        cons = DesignConstraints(V0=0.4, K=1.4)
        sol = effort_limit(cons, P)
        br = best_response(sol.reward, sol.equilibrium.distribution, P)
        assert abs(br.value - cons.V0) < 1e-8

    def test_suboptimality(self):
        R = PiecewiseRank([0.0, 0.5, 2.0])
        mu_t = DistributionGrid.prior(P)
        br = best_response(R, mu_t, P)
        tilt = reward_tilt(R, mu_t, P)
        rng = np.random.default_rng(5)
        for _ in range(100):
            a, b, c = rng.normal(size=3)
            eps = rng.uniform(0.01, 0.5)
            logpdf = lambda x, a=a, b=b, c=c, eps=eps: log_f0(P, x) + tilt(x) + eps * np.sin(a * np.asarray(x) + b) * c
            alt = DistributionGrid.from_log_density(logpdf, P, x_breakpoints=R.x_breakpoints(mu_t))
            assert objective(R, mu_t, alt, P) <= br.value + 1e-8


class TestControlField:
    def test_constant_has_zero_drift(self):
        field = optimal_drift(constant(2.0), DistributionGrid.prior(P), P)
        t, x = np.meshgrid(np.linspace(0, 1, 11), np.linspace(-4, 4, 11))
        assert np.max(np.abs(field.drift(t, x))) < 1e-12
        assert np.all(field.u(t, x) > 0)

    def test_effort_limit_constant_drift(self):
        cons = DesignConstraints(V0=0.0, K=1.0)
        sol = effort_limit(cons, P)
        field = optimal_drift(sol.reward, sol.equilibrium.distribution, P)
        t, x = np.meshgrid(np.linspace(0, 1, 50), np.linspace(-4, 6, 50))
        assert np.max(np.abs(field.drift(t, x) - 1.0)) < 1e-6

    @pytest.mark.parametrize(
        "R", [PureRank(lambda r: 2 * r), PiecewiseRank([0.0, 1.0, 3.0])], ids=["smooth", "step"]
    )
    def test_slack_far_from_pack(self, R):
        (eq,) = solve_equilibrium(R, P)
        field = optimal_drift(R, eq.distribution, P)
        for t in (0.0, 0.5, 0.9):
            assert abs(field.drift(t, P.x0 + 8 * P.scale)) < 1e-3
            assert abs(field.drift(t, P.x0 - 8 * P.scale)) < 1e-3

    @pytest.mark.parametrize(
        "R", [PureRank(lambda r: 2 * r), PiecewiseRank([0.0, 1.0, 3.0]), StateMean(lambda x, m: np.tanh(x))]
    )
    def test_finite_difference(self, R):
        mu = DistributionGrid.normal(0.2, 1.0)
        field = optimal_drift(R, mu, P)
        h = 1e-5
        for t in (0.0, 0.3, 0.8):
            for x in (-1.5, 0.0, 0.4, 2.0):
                fd = (field.u(t, x + h) - field.u(t, x - h)) / (2 * h)
                ux = field.u_x(t, x)
                assert abs(fd - ux) <= 1e-5 * max(abs(ux), 1e-3 * field.u(t, x))

    def test_terminal_limit(self):
        R = StateMean(lambda x, m: np.tanh(x))
        field = optimal_drift(R, DistributionGrid.prior(P), P)
        x = np.linspace(-2, 2, 9)
        near = field.drift(1.0 - 1e-9, x)
        before = field.drift(1.0 - 1e-5, x)
        exact = P.sigma**2 * (1 - np.tanh(x) ** 2) / P.two_c_sigma2
        assert np.max(np.abs(near - exact)) < 1e-8
        assert np.max(np.abs(before - exact)) < 1e-4
