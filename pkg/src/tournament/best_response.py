"""The single player's problem against a fixed population law.

Against a law ``mu`` the reward reduces to a function ``R_mu(x)`` of the terminal
value, and the optimal terminal law is the exponential tilt

    f*(x) = f0(x) exp(R_mu(x) / kappa) / beta,    kappa = 2 c sigma^2,

with value ``kappa ln beta``. The Markovian drift attaining it is
``a*(t, x) = sigma^2 d/dx ln u(t, x)`` where ``u(t, x) = E exp(R_mu(x + sigma sqrt(T-t) Z) / kappa)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import logsumexp, ndtr

from .core import ModelParams, hermite_normal, log_f0
from .errors import UnboundedValue
from .grid import DistributionGrid, rank_grid, relative_entropy_to_prior
from .reward import PiecewiseRank, RewardSpec

GH_NODES = 128
#: Below this fraction of the horizon the drift uses its terminal limit.
TERMINAL_WINDOW = 1e-6


@dataclass(frozen=True)
class BestResponse:
    """Optimal reply to a population law.

    Attributes
    ----------
    beta : float
        Normaliser ``int f0 exp(R_mu / kappa)``.
    density : DistributionGrid
        The optimal terminal law.
    value : float
        ``kappa * log_beta``.
    log_beta : float
    """

    beta: float
    density: DistributionGrid
    value: float
    log_beta: float


def reward_tilt(R: RewardSpec, mu: DistributionGrid, params: ModelParams) -> Callable:
    """``x -> R_mu(x) / kappa``."""
    composed = R.on_law(mu)
    kappa = params.two_c_sigma2

    def tilt(x):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.asarray(composed(x), dtype=float) / kappa

    return tilt


def tilt_is_unbounded(tilt: Callable, params: ModelParams, k_max: int = 12) -> bool:
    """Heuristic test for ``int f0 exp(tilt) = inf``.

    The tilt is sampled at ``x0 +- k sigma sqrt(T)``. If its second difference in
    standard units is at least one at the outer samples on either side, the tilt
    grows at least as fast as the Gaussian log-density decays.
    """
    ks = np.array([k_max - 2, k_max - 1, k_max], dtype=float)
    for side in (-1.0, 1.0):
        vals = tilt(params.x0 + side * ks * params.scale)
        if not np.all(np.isfinite(vals)):
            if np.any(vals == np.inf):
                return True
            continue
        if vals[2] - 2.0 * vals[1] + vals[0] >= 1.0 - 1e-9:
            return True
    return False


def _tilted_law(tilt: Callable, params: ModelParams, x_breakpoints, grid) -> DistributionGrid:
    if tilt_is_unbounded(tilt, params):
        raise UnboundedValue("normaliser beta is infinite: the reward outgrows the Gaussian tail")

    def logpdf(x):
        return log_f0(params, x) + tilt(x)

    return DistributionGrid.from_log_density(logpdf, params, grid, x_breakpoints)


def beta_of(R: RewardSpec, mu_tilde: DistributionGrid, params: ModelParams, *, log: bool = False) -> float:
    """Normaliser ``beta = int f0(y) exp(R_mu(y) / kappa) dy``; ``inf`` when it diverges."""
    tilt = reward_tilt(R, mu_tilde, params)
    if tilt_is_unbounded(tilt, params):
        return math.inf
    law = _tilted_law(tilt, params, R.x_breakpoints(mu_tilde), rank_grid(len(mu_tilde.r_nodes)))
    return law.log_normaliser if log else math.exp(law.log_normaliser)


def best_response(R: RewardSpec, mu_tilde: DistributionGrid, params: ModelParams) -> BestResponse:
    """Optimal terminal law, normaliser and value against ``mu_tilde``.

    Raises
    ------
    UnboundedValue
        If the normaliser diverges.
    """
    tilt = reward_tilt(R, mu_tilde, params)
    law = _tilted_law(tilt, params, R.x_breakpoints(mu_tilde), rank_grid(len(mu_tilde.r_nodes)))
    log_beta = law.log_normaliser
    return BestResponse(math.exp(log_beta), law, params.two_c_sigma2 * log_beta, log_beta)


def objective(R: RewardSpec, mu_tilde: DistributionGrid, mu: DistributionGrid, params: ModelParams) -> float:
    """``int R_mu_tilde d mu - kappa H(mu | prior)`` for a candidate terminal law ``mu``."""
    payoff = mu.rank_integral(R.on_law(mu_tilde)(mu.q_values))
    return payoff - params.two_c_sigma2 * relative_entropy_to_prior(mu, params)


class ControlField:
    """The value transform ``u(t, x)`` and the optimal feedback drift ``a*(t, x)``.

    Inputs broadcast; evaluation holds no mutable state and is thread-safe.
    Step rewards are handled in closed form through the Gaussian c.d.f.; every
    other reward uses 128-node Gauss-Hermite quadrature in log space.
    """

    def __init__(self, tilt: Callable, params: ModelParams, t_nodes=None, steps: tuple | None = None):
        self.tilt = tilt
        self.params = params
        self.t_nodes = np.linspace(0.0, params.T, 101) if t_nodes is None else np.asarray(t_nodes, dtype=float)
        self._steps = steps  # (x_edges, log_levels) for step rewards
        z, w = hermite_normal(GH_NODES)
        self._z = z
        self._logw = np.log(w)

    def _tau(self, t):
        return self.params.sigma * np.sqrt(np.maximum(self.params.T - np.asarray(t, dtype=float), 0.0))

    def _near_terminal(self, t):
        return self.params.T - np.asarray(t, dtype=float) < TERMINAL_WINDOW * self.params.T

    def _log_u_and_ratio(self, t, x):
        """``ln u`` and ``u_x / u`` away from the terminal time."""
        t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
        tau = np.maximum(self._tau(t), 1e-300)
        if self._steps is not None:
            edges, log_levels = self._steps
            a = (edges[None, :] - x.reshape(-1, 1)) / tau.reshape(-1, 1)
            # mass of N(x, tau^2) in each reward cell, upper cells from the right tail
            cdf = ndtr(a)
            sf = ndtr(-a)
            lower = np.concatenate([np.zeros((a.shape[0], 1)), cdf], axis=1)
            upper = np.concatenate([cdf, np.ones((a.shape[0], 1))], axis=1)
            lower_sf = np.concatenate([sf, np.zeros((a.shape[0], 1))], axis=1)
            upper_sf = np.concatenate([np.ones((a.shape[0], 1)), sf], axis=1)
            mass = np.where(upper < 0.5, upper - lower, upper_sf - lower_sf)
            with np.errstate(divide="ignore"):
                log_mass = np.log(np.maximum(mass, 0.0)) + log_levels[None, :]
            log_u = logsumexp(log_mass, axis=1)
            phi = np.exp(-0.5 * a * a) / math.sqrt(2.0 * math.pi)
            # d/dx of cell mass: (phi(a_{i-1}) - phi(a_i)) / tau
            dphi = np.concatenate([np.zeros((a.shape[0], 1)), phi], axis=1) - np.concatenate(
                [phi, np.zeros((a.shape[0], 1))], axis=1
            )
            weights = np.exp(log_levels[None, :] - log_u[:, None])
            ratio = np.sum(weights * dphi, axis=1) / tau.reshape(-1)
            return log_u.reshape(x.shape), ratio.reshape(x.shape)
        y = x[..., None] + tau[..., None] * self._z
        ell = self.tilt(y) + self._logw
        log_u = logsumexp(ell, axis=-1)
        p = np.exp(ell - log_u[..., None])
        ratio = np.sum(p * self._z, axis=-1) / tau
        return log_u, ratio

    def log_u(self, t, x):
        t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
        out = np.empty(x.shape)
        end = self._near_terminal(t)
        if np.any(end):
            out[end] = self.tilt(x[end])
        if np.any(~end):
            out[~end] = self._log_u_and_ratio(t[~end], x[~end])[0]
        return out

    def u(self, t, x):
        """``u(t, x) = E exp(R_mu(x + sigma sqrt(T - t) Z) / kappa)``."""
        return np.exp(self.log_u(t, x))

    def u_x(self, t, x):
        """Spatial derivative of ``u`` by Gaussian integration by parts."""
        return self.u(t, x) * self.drift(t, x) / self.params.sigma**2

    def drift(self, t, x):
        """Optimal feedback ``a*(t, x) = sigma^2 u_x / u``.

        Within ``1e-6 T`` of the horizon the limit ``dR_mu/dx / (2c)`` is used,
        with a central difference of the reward.
        """
        t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
        out = np.empty(x.shape)
        end = self._near_terminal(t)
        sigma2 = self.params.sigma**2
        if np.any(end):
            h = 1e-5 * self.params.scale
            xe = x[end]
            out[end] = sigma2 * (self.tilt(xe + h) - self.tilt(xe - h)) / (2.0 * h)
        if np.any(~end):
            out[~end] = sigma2 * self._log_u_and_ratio(t[~end], x[~end])[1]
        return out

    __call__ = drift


def optimal_drift(
    R: RewardSpec, mu_tilde: DistributionGrid, params: ModelParams, t_nodes=None
) -> ControlField:
    """Feedback drift attaining the best response to ``mu_tilde``.

    Raises
    ------
    UnboundedValue
        If the normaliser diverges.
    """
    tilt = reward_tilt(R, mu_tilde, params)
    if tilt_is_unbounded(tilt, params):
        raise UnboundedValue("normaliser beta is infinite: the reward outgrows the Gaussian tail")
    steps = None
    if isinstance(R, PiecewiseRank) and R.levels.size > 1:
        inner = R.edges[1:-1]
        steps = (np.atleast_1d(mu_tilde.quantile(inner)).astype(float), R.levels / params.two_c_sigma2)
    return ControlField(tilt, params, t_nodes, steps)
