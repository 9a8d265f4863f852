import math

import numpy as np
import pytest
from scipy import integrate as spi

import oracles
from tournament.core import ModelParams
from tournament.errors import DomainError, InvalidReward
from tournament.hitting_time import (
    FirstPassageLaw,
    HittingReward,
    first_passage_cdf,
    first_passage_density,
    hitting_value,
)

P = ModelParams(x0=1.0, sigma=1.0, T=1.0, c=1.0)
KAPPA = P.two_c_sigma2


class TestFirstPassage:
    def test_cdf_at_one(self):
        assert abs(first_passage_cdf(P, 1.0) - 0.317310507862914) < 1e-14
        assert abs(FirstPassageLaw(P).atom_mass - (1 - 0.317310507862914)) < 1e-14

    def test_density_integrates_to_cdf(self):
        p = ModelParams(x0=0.7, sigma=1.4, T=2.0)
        val, _ = spi.quad(lambda t: first_passage_density(p, t), 0.0, 2.0, epsabs=1e-14, limit=200)
        assert abs(val - first_passage_cdf(p, 2.0)) < 1e-12
        t = np.array([0.1, 0.5, 1.9])
        assert np.allclose(first_passage_density(p, t), [oracles.first_passage_pdf(0.7, 1.4, s) for s in t], rtol=1e-13)

    def test_density_at_zero(self):
        assert first_passage_density(P, 0.0) == 0.0

    def test_sf_complements_cdf(self):
        law = FirstPassageLaw(P)
        t = np.array([1e-3, 0.2, 0.9])
        assert np.allclose(law.cdf(t) + law.sf(t), 1.0, atol=1e-15)

    def test_needs_positive_start(self):
        with pytest.raises(DomainError):
            FirstPassageLaw(ModelParams(x0=0.0))
        with pytest.raises(DomainError):
            hitting_value(HittingReward(lambda t: t, 0.0), ModelParams(x0=-1.0))


class TestReward:
    def test_non_finite(self):
        with pytest.raises(InvalidReward):
            HittingReward(lambda t: t, math.inf)
        with pytest.raises(InvalidReward):
            hitting_value(HittingReward(lambda t: np.where(np.asarray(t) < 0.5, -np.inf, 0.0), 0.0), P)


class TestValue:
    def test_constant(self):
        for C in (-1.5, 0.0, 3.0):
            hv = hitting_value(HittingReward(lambda t, C=C: np.full_like(np.asarray(t, float), C), C), P)
            assert abs(hv.value - C) < 1e-10
            assert abs(hv.beta - first_passage_cdf(P, P.T)) < 1e-10

    def test_linear_penalty(self):
        hv = hitting_value(HittingReward(lambda t: -2 * np.asarray(t), -2.0), P)
        assert abs(hv.value - (-1.6229980410950826)) < 1e-10
        assert abs(hv.beta - 0.43459677) < 1e-8

    def test_brute_force_fine_bins(self):
        R = lambda t: 1.5 - np.asarray(t) ** 2
        hv = hitting_value(HittingReward(R, -0.5), P)
        ref, beta = oracles.hitting_brute_force(R, -0.5, P.x0, P.sigma, P.T, KAPPA, bins=2000)
        assert abs(hv.value - ref) < 1e-6
        assert abs(hv.beta - beta) < 1e-6

    def test_step_reward_breakpoint(self):
        R = lambda t: np.where(np.asarray(t) < 0.4, 2.0, 0.5)
        hv = hitting_value(HittingReward(R, 0.0, breakpoints=(0.4,)), P)
        F = lambda t: first_passage_cdf(P, t)
        total = F(0.4) * math.exp(2.0 / KAPPA) + (F(1.0) - F(0.4)) * math.exp(0.5 / KAPPA) + (1 - F(1.0))
        assert abs(hv.value - KAPPA * math.log(total)) < 1e-10

    def test_density_mass_is_beta(self):
        hv = hitting_value(HittingReward(lambda t: np.sin(3 * np.asarray(t)), 0.2), P)
        mass, _ = spi.quad(hv.density.pdf, 0.0, P.T, epsabs=1e-13, limit=200)
        assert abs(mass - hv.beta) < 1e-10
        assert abs(hv.density.hit_mass + hv.density.atom_mass - 1) < 1e-14
        assert 0 < hv.beta < 1
        assert hv.density.pdf(1.5) == 0.0

    def test_monotone_in_reward(self):
        base = lambda t: 1.0 - np.asarray(t)
        v1 = hitting_value(HittingReward(base, 0.0), P).value
        v2 = hitting_value(HittingReward(lambda t: base(t) + 0.3 * np.asarray(t) ** 2, 0.0), P).value
        v3 = hitting_value(HittingReward(base, 0.4), P).value
        assert v1 < v2 and v1 < v3

    def test_value_is_sup_over_hit_mass(self):
        # the closed form dominates the split objective at every hit mass
        R = lambda t: 2.0 - 3.0 * np.asarray(t)
        hv = hitting_value(HittingReward(R, -1.0), P)
        ref, _ = oracles.hitting_brute_force(R, -1.0, P.x0, P.sigma, P.T, KAPPA, bins=400)
        assert ref <= hv.value + 1e-6
