"""Tournament design: reward functions that induce a prescribed equilibrium.

A law ``mu`` is the equilibrium of a pure-rank reward exactly when its
normalised density ``zeta = f_mu / f0`` is increasing and log-bounded; the
reward is then ``kappa ln zeta(q_mu(r)) + C`` with game value ``C`` and total
budget ``C + kappa H(mu | prior)``. The three design problems below pick a
target law and read the reward off this identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .best_response import beta_of
from .core import ModelParams, log_f0, normal_score
from .equilibrium import EquilibriumResult, _result, solve_equilibrium
from .errors import DomainError, InvalidReward, NotAttainable, NotFeasible
from .grid import DistributionGrid, rank_grid, relative_entropy_to_prior
from .reward import LinearQuantile, PiecewiseRank, PureRank, RewardSpec, constant

BINDING_TOL = 1e-8
#: Relative size of the tail increments of ``ln zeta`` below which it is treated as bounded.
LOG_BOUND_TOL = 1e-6
ALPHA_BISECTIONS = 200


@dataclass(frozen=True)
class DesignConstraints:
    """Reservation utility ``V0`` and budget ``K >= V0``."""

    V0: float
    K: float

    def __post_init__(self):
        if not (math.isfinite(self.V0) and math.isfinite(self.K)):
            raise DomainError("V0 and K must be finite")
        if self.K < self.V0:
            raise DomainError("K >= V0 required")

    @property
    def slack(self) -> float:
        return self.K - self.V0


@dataclass(frozen=True)
class DesignSolution:
    """A designed reward with its re-solved equilibrium.

    Attributes
    ----------
    reward : RewardSpec
    equilibrium : EquilibriumResult
        Obtained by solving the game for ``reward`` from scratch.
    objective_value : float
        Optimal value of the design objective.
    binding : dict
        Which constraints hold with equality (``"budget"``, ``"reservation"``).
    details : dict
        Problem-specific quantities (``x_alpha``, ``lambda``, net profit, ...).
    """

    reward: RewardSpec
    equilibrium: EquilibriumResult
    objective_value: float
    binding: dict
    details: dict = field(default_factory=dict)


# attainability and inverse design -----------------------------------------------------


def normalized_density(mu: DistributionGrid, params: ModelParams) -> Callable:
    """``r -> zeta_mu(q_mu(r))`` where ``zeta_mu = f_mu / f0``."""
    if mu.logpdf_fn is not None:
        logpdf = mu.logpdf_fn
        return lambda r: np.exp(logpdf(mu.quantile(r)) - log_f0(params, mu.quantile(r)))
    interp = mu.rank_interpolant(mu.log_zeta_nodes(params))
    return lambda r: np.exp(interp(r))


def _log_zeta_is_monotone(log_zeta: np.ndarray, tol: float) -> bool:
    scale = 1.0 + float(np.max(np.abs(log_zeta)))
    return bool(np.all(np.diff(log_zeta) >= -tol * scale))


def _log_zeta_is_bounded(mu: DistributionGrid, params: ModelParams, log_zeta: np.ndarray) -> bool:
    """Heuristic boundedness test for ``ln zeta``.

    With an exact log-density, ``ln zeta`` is probed far beyond the grid and must
    settle on both sides; otherwise it must be flat over the outermost 16 nodes.
    """
    spread = 1.0 + float(np.ptp(log_zeta))
    if mu.logpdf_fn is not None:
        steps = params.scale * np.array([16.0, 32.0, 64.0])
        for xs in (mu.q_values[-1] + steps, mu.q_values[0] - steps):
            with np.errstate(all="ignore"):
                lz = mu.logpdf_fn(xs) - log_f0(params, xs)
            if not np.all(np.isfinite(lz)) or abs(lz[2] - lz[1]) > LOG_BOUND_TOL * spread:
                return False
        return True
    lower = abs(log_zeta[16] - log_zeta[0])
    upper = abs(log_zeta[-1] - log_zeta[-17])
    return lower < LOG_BOUND_TOL * spread and upper < LOG_BOUND_TOL * spread


def is_attainable(mu: DistributionGrid, params: ModelParams, tol: float = 1e-9) -> bool:
    """Whether ``zeta_mu`` is nondecreasing along the grid (log-boundedness aside)."""
    if mu.gaussian is not None:
        return math.isclose(mu.gaussian[1], params.scale, rel_tol=1e-12)
    return _log_zeta_is_monotone(mu.log_zeta_nodes(params), tol)


def inverse_design(mu: DistributionGrid, params: ModelParams, tol: float = 1e-9) -> RewardSpec:
    """The pure-rank reward ``R0(r) = kappa ln zeta_mu(q_mu(r))`` inducing ``mu``.

    ``R0`` has game value zero; adding ``C`` shifts the value to ``C``. A normal
    target with the prior's variance yields the unbounded linear-quantile reward.

    Raises
    ------
    NotAttainable
        If ``zeta_mu`` is not increasing.
    """
    kappa = params.two_c_sigma2
    s = params.scale
    if mu.gaussian is not None:
        mean, sd = mu.gaussian
        if not math.isclose(sd, s, rel_tol=1e-12):
            raise NotAttainable("a normal target with a variance other than sigma^2 T has non-monotone zeta")
        delta = mean - params.x0
        return LinearQuantile(kappa * delta * delta / (2.0 * s * s), kappa * delta / s, name="inverse-design")
    log_zeta = mu.log_zeta_nodes(params)
    if not _log_zeta_is_monotone(log_zeta, tol):
        raise NotAttainable("normalised density zeta_mu is not increasing")
    bounded = _log_zeta_is_bounded(mu, params, log_zeta)
    if mu.logpdf_fn is not None:
        logpdf = mu.logpdf_fn

        def fn(r):
            q = mu.quantile(r)
            return kappa * (logpdf(q) - log_f0(params, q))

    else:
        interp = mu.rank_interpolant(kappa * log_zeta)
        fn = interp
    return PureRank(fn, bounded=bounded, breakpoints=mu.breakpoints, name="inverse-design")


def feasibility_interval(
    mu: DistributionGrid, cons: DesignConstraints, params: ModelParams, tol: float = 1e-12
) -> tuple[float, float]:
    """Constants ``C`` for which ``R0 + C`` meets ``V(R) >= V0`` and ``int R <= K``.

    Raises
    ------
    NotFeasible
        If ``V0 > K - kappa H(mu | prior)``; carries the entropy and its bound.
    """
    kappa = params.two_c_sigma2
    H = relative_entropy_to_prior(mu, params)
    upper = cons.K - kappa * H
    if upper < cons.V0 - tol * (1.0 + abs(cons.V0)):
        raise NotFeasible(
            f"entropy {H:.6g} exceeds the budget bound {(cons.K - cons.V0) / kappa:.6g}",
            entropy=H,
            bound=(cons.K - cons.V0) / kappa,
        )
    return cons.V0, max(upper, cons.V0)


# rank-alpha ---------------------------------------------------------------------------


def _log1pmx(t):
    """``log(1 + t) - t`` without cancellation for small ``t``."""
    if abs(t) < 1e-2:
        term, total = t, 0.0
        for k in range(2, 30):
            term *= -t
            total += term / k
        return total
    return math.log1p(t) - t


def bernoulli_divergence(alpha: float, x: float) -> float:
    """``alpha ln(alpha/x) + (1 - alpha) ln((1 - alpha)/(1 - x))``, accurate near ``x = alpha``."""
    d = x - alpha
    return -alpha * _log1pmx(d / alpha) - (1.0 - alpha) * _log1pmx(-d / (1.0 - alpha))


def solve_x_alpha(alpha: float, target: float, iterations: int = ALPHA_BISECTIONS) -> float:
    """Root in ``[alpha, 1 - 1e-12]`` of ``bernoulli_divergence(alpha, x) = target`` by bisection."""
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    if target < 0:
        raise DomainError("target must be nonnegative")
    if target == 0:
        return alpha
    lo, hi = alpha, 1.0 - 1e-12
    if hi <= lo or bernoulli_divergence(alpha, hi) < target:
        raise DomainError("budget too large for the rank-alpha bracket [alpha, 1 - 1e-12]")
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if bernoulli_divergence(alpha, mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 0:
            break
    return 0.5 * (lo + hi)


def design_rank_alpha(alpha: float, cons: DesignConstraints, params: ModelParams) -> DesignSolution:
    """Reward maximising the rank-``alpha`` quantile of the equilibrium law.

    The optimum is a two-level step at ``r = alpha`` (upper level from ``alpha``
    on) with objective ``Q(alpha) = x0 + sigma sqrt(T) N^{-1}(x_alpha)``.
    """
    kappa = params.two_c_sigma2
    x_alpha = solve_x_alpha(alpha, cons.slack / kappa)
    low = cons.V0 + kappa * math.log(alpha / x_alpha)
    high = cons.V0 + kappa * (math.log1p(-alpha) - math.log1p(-x_alpha))
    reward = PiecewiseRank([low, high], [0.0, alpha, 1.0])
    (eq,) = solve_equilibrium(reward, params)
    Q = params.x0 + params.scale * float(normal_score(x_alpha, 1.0 - x_alpha))
    total = alpha * low + (1.0 - alpha) * high
    return DesignSolution(
        reward=reward,
        equilibrium=eq,
        objective_value=Q,
        binding={"reservation": abs(eq.value - cons.V0) <= BINDING_TOL, "budget": abs(total - cons.K) <= BINDING_TOL},
        details={"x_alpha": x_alpha, "alpha": alpha, "achieved_quantile": float(eq.distribution.quantile(alpha)), "reward_integral": total},
    )


# net profit ---------------------------------------------------------------------------


def design_net_profit(
    g: Callable,
    V0: float,
    params: ModelParams,
    g_breakpoints: Sequence[float] = (),
    x_range: tuple | None = None,
) -> DesignSolution:
    """Reward maximising planner profit ``int g d mu - int R`` subject to ``V(R) >= V0``.

    ``objective_value`` is the expected profit ``E_{mu*} g`` before transfers.
    ``details`` also reports ``net_of_transfer = kappa ln beta_g - V0``,
    the expected profit minus the reward outlay, labelled separately.

    Raises
    ------
    InvalidReward
        If ``g`` is not nondecreasing on the sampled range.
    """
    kappa = params.two_c_sigma2
    lo, hi = x_range or (params.x0 - 10 * params.scale, params.x0 + 10 * params.scale)
    xs = np.linspace(lo, hi, 1000)
    gx = np.asarray(g(xs), dtype=float)
    if not np.all(np.isfinite(gx)):
        raise InvalidReward("profit function must be finite")
    if np.any(np.diff(gx) < -1e-12 * (1.0 + np.max(np.abs(gx)))):
        raise InvalidReward("profit function must be nondecreasing")

    law = DistributionGrid.from_log_density(
        lambda x: log_f0(params, x) + np.asarray(g(x), dtype=float) / kappa, params, rank_grid(), g_breakpoints
    )
    log_beta = law.log_normaliser
    shift = V0 - kappa * log_beta

    def fn(r):
        return np.asarray(g(law.quantile(r)), dtype=float) + shift

    reward = PureRank(fn, bounded=True, breakpoints=law.breakpoints, name="net-profit")
    (eq,) = solve_equilibrium(reward, params)
    gross = law.rank_integral(np.asarray(g(law.q_values), dtype=float))
    outlay = eq.distribution.rank_integral(fn(eq.distribution.r_nodes))
    return DesignSolution(
        reward=reward,
        equilibrium=eq,
        objective_value=gross,
        binding={"reservation": abs(eq.value - V0) <= BINDING_TOL},
        details={
            "gross_profit": gross,
            "net_of_transfer": kappa * log_beta - V0,
            "expected_transfer": outlay,
            "log_beta_g": log_beta,
            "target": law,
        },
    )


# total effort -------------------------------------------------------------------------


def effort_multiplier(cons: DesignConstraints, params: ModelParams) -> float:
    """``lambda = sigma^2 sqrt(c T / (K - V0))``."""
    if cons.slack <= 0:
        return math.inf
    return params.sigma**2 * math.sqrt(params.c * params.T / cons.slack)


def effort_cap(cons: DesignConstraints, params: ModelParams) -> float:
    """``sqrt((K - V0) T / c)``, the supremum of total effort."""
    return math.sqrt(cons.slack * params.T / params.c)


def default_truncation(cons: DesignConstraints, params: ModelParams) -> float:
    """``M`` with ``exp(-(M - |x0|)/lambda) = 1e-8``."""
    return abs(params.x0) + effort_multiplier(cons, params) * math.log(1e8)


def truncated_effort_law(M: float, cons: DesignConstraints, params: ModelParams) -> DistributionGrid:
    """``mu_M`` with density proportional to ``f0(y) exp(clip(y, -M, M) / lambda)``."""
    lam = effort_multiplier(cons, params)
    return DistributionGrid.from_log_density(
        lambda y: log_f0(params, y) + np.clip(y, -M, M) / lam, params, rank_grid(), (-M, M)
    )


def effort_limit_reward(cons: DesignConstraints, params: ModelParams) -> LinearQuantile:
    """The unbounded limit ``R*(r) = K + 2 sigma sqrt(c (K - V0)) N^{-1}(r)``."""
    return LinearQuantile(cons.K, 2.0 * params.sigma * math.sqrt(params.c * cons.slack), name="effort-limit")


def effort_limit(cons: DesignConstraints, params: ModelParams) -> DesignSolution:
    """The limit design: ``R*`` with its constructed equilibrium ``N(x0 + sqrt((K-V0)T/c), sigma^2 T)``.

    Whether this equilibrium is unique under ``R*`` is open; only its residual is reported.
    """
    reward = effort_limit_reward(cons, params)
    cap = effort_cap(cons, params)
    law = DistributionGrid.normal(params.x0 + cap, params.scale)
    log_beta = beta_of(reward, law, params, log=True)
    eq = _result(law, log_beta, reward, params, ("uniqueness under the unbounded reward is not established",))
    return DesignSolution(
        reward=reward,
        equilibrium=eq,
        objective_value=cap,
        binding={"reservation": abs(eq.value - cons.V0) <= BINDING_TOL},
        details={"cap": cap, "lambda": effort_multiplier(cons, params), "constant_drift": math.sqrt(cons.slack / (params.c * params.T))},
    )


def design_total_effort(cons: DesignConstraints, params: ModelParams, M: float | None = None) -> DesignSolution:
    """Truncated effort-maximising reward ``R_M = inverse_design(mu_M) + V0``.

    ``objective_value`` is ``A(R_M)`` read from the equilibrium re-solved for
    ``R_M``; ``details`` holds the cap, ``lambda``, ``M`` and the mean of
    ``mu_M`` computed directly.
    """
    cap = effort_cap(cons, params)
    if cons.slack == 0:
        reward = constant(cons.V0)
        (eq,) = solve_equilibrium(reward, params)
        return DesignSolution(reward, eq, 0.0, {"reservation": True, "budget": True}, {"cap": 0.0, "lambda": math.inf, "M": M})
    if M is None:
        M = default_truncation(cons, params)
    if not M > 0:
        raise DomainError("M must be > 0")
    law = truncated_effort_law(M, cons, params)
    reward = inverse_design(law, params) + cons.V0
    (eq,) = solve_equilibrium(reward, params)
    total = eq.distribution.rank_integral(np.asarray(reward.evaluate(0.0, eq.distribution.r_nodes, None)))
    return DesignSolution(
        reward=reward,
        equilibrium=eq,
        objective_value=eq.mean - params.x0,
        binding={"reservation": abs(eq.value - cons.V0) <= BINDING_TOL, "budget": abs(total - cons.K) <= BINDING_TOL},
        details={
            "cap": cap,
            "lambda": effort_multiplier(cons, params),
            "M": M,
            "target_effort": law.mean - params.x0,
            "reward_integral": total,
            "entropy": relative_entropy_to_prior(law, params),
            "target": law,
        },
    )
