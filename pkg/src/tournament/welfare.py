"""Centralised welfare and the price of anarchy.

A planner who prescribes one terminal law for everybody solves a control problem
of McKean-Vlasov type. Two reward shapes reduce it to a scalar search over the
mean ``m``:

* rank and mean only: ``V_c = sup_m { Pi(m) - (c/T)(m - x0)^2 }`` with
  ``Pi(m) = int_0^1 R(r, m) dr``;
* state and mean only: ``V_c = sup_m { lambda_m m + kappa ln int f0 exp((R(y, m) - lambda_m y)/kappa) }``
  where ``lambda_m`` makes the tilted law have mean ``m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import bisect, minimize_scalar

from .core import ModelParams, log_f0
from .equilibrium import solve_equilibrium
from .errors import DomainError, SolverError, TrivialPoA, UnboundedValue
from .grid import integrate_rank, tilted_stats
from .reward import LinearQuantile, RewardSpec, StateMean

SCAN_POINTS = 2001
STATE_SCAN_POINTS = 201
MAX_EXPANSIONS = 6


class CentralizedValue(NamedTuple):
    """Optimal centralised welfare and the mean that attains it."""

    value: float
    m_star: float


@dataclass(frozen=True)
class WelfareReport:
    """Centralised welfare against the worst equilibrium.

    Attributes
    ----------
    v_centralized : float
    m_star : float
        Mean of the centralised optimal law.
    equilibrium_values : list of float
        Game values of every equilibrium found.
    poa : float
        ``v_centralized / min(equilibrium_values)``; ``inf`` when the denominator is not positive.
    notes : tuple of str
    """

    v_centralized: float
    m_star: float
    equilibrium_values: list
    poa: float
    notes: tuple = field(default=())


def _maximise(objective: Callable, center: float, half: float, points: int, xatol: float = 1e-10) -> CentralizedValue:
    """Grid scan over ``center +- half`` followed by bounded Brent refinement.

    The bracket is doubled while the maximum sits on its edge; an edge maximum
    after ``MAX_EXPANSIONS`` doublings is reported as an unbounded supremum.
    """
    for _ in range(MAX_EXPANSIONS + 1):
        ms = np.linspace(center - half, center + half, points)
        vals = np.array([objective(m) for m in ms])
        if not np.all(np.isfinite(vals)):
            raise SolverError("welfare objective is not finite on the scan")
        k = int(np.argmax(vals))
        if 0 < k < points - 1:
            res = minimize_scalar(lambda m: -objective(m), bounds=(ms[k - 1], ms[k + 1]), method="bounded", options={"xatol": xatol})
            best = -res.fun
            if best >= vals[k]:
                return CentralizedValue(float(best), float(res.x))
            return CentralizedValue(float(vals[k]), float(ms[k]))
        half *= 2.0
    raise UnboundedValue("centralised welfare grows without bound at the edge of every scanned bracket")


def _lipschitz(fn: Callable, center: float, half: float) -> float:
    ms = np.linspace(center - half, center + half, 201)
    vals = np.array([fn(m) for m in ms])
    return float(np.max(np.abs(np.diff(vals)) / (ms[1] - ms[0])))


def centralized_value_rank(Pi: Callable, params: ModelParams) -> CentralizedValue:
    """``sup_m { Pi(m) - (c/T)(m - x0)^2 }``; the optimal law is ``N(m*, sigma^2 T)``.

    Raises
    ------
    UnboundedValue
        If the objective keeps growing at the scan edge (super-quadratic ``Pi``).
    """
    s = params.scale
    lip = _lipschitz(Pi, params.x0, 10.0 * s)
    half = 10.0 * max(s, params.T / (2.0 * params.c) * lip)
    objective = lambda m: float(Pi(m)) - params.c / params.T * (m - params.x0) ** 2
    return _maximise(objective, params.x0, half, SCAN_POINTS)


def _tilted_mean_at(R: StateMean, m: float, lam: float, params: ModelParams):
    kappa = params.two_c_sigma2
    logpdf = lambda y: log_f0(params, y) + (R.evaluate(y, 0.5, m) - lam * np.asarray(y)) / kappa
    return tilted_stats(logpdf, params)


def solve_lambda_m(R: StateMean, m: float, params: ModelParams, tol: float = 1e-13) -> float:
    """Multiplier ``lambda`` for which ``f0 exp((R(., m) - lambda x)/kappa)`` has mean ``m``.

    The tilted mean decreases strictly in ``lambda``; the root is bracketed by
    doubling and then found by bisection.

    Raises
    ------
    SolverError
        If no bracket is found.
    """
    if not isinstance(R, StateMean):
        raise DomainError("lambda_m is defined for state-mean rewards")
    h = lambda lam: _tilted_mean_at(R, m, lam, params)[1] - m
    kappa = params.two_c_sigma2
    # central guess from the Gaussian shift, then widen
    guess = -kappa * (m - params.x0) / params.scale**2
    width = 1.0 + abs(guess)
    for _ in range(60):
        lo, hi = guess - width, guess + width
        try:
            h_lo, h_hi = h(lo), h(hi)
        except DomainError:
            h_lo = h_hi = math.nan
        if h_lo > 0 > h_hi:
            return float(bisect(h, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500))
        if h_lo == 0:
            return lo
        if h_hi == 0:
            return hi
        width *= 2.0
    raise SolverError(f"could not bracket lambda_m at m = {m}")


def _state_objective(R: StateMean, m: float, params: ModelParams) -> float:
    lam = solve_lambda_m(R, m, params)
    log_norm, _ = _tilted_mean_at(R, m, lam, params)
    return lam * m + params.two_c_sigma2 * log_norm


def centralized_value_state(R: StateMean, params: ModelParams) -> CentralizedValue:
    """``sup_m { lambda_m m + kappa ln int f0 exp((R(y, m) - lambda_m y)/kappa) dy }``."""
    if not isinstance(R, StateMean):
        raise DomainError("centralized_value_state needs a state-mean reward")
    s = params.scale
    slope_x = _lipschitz(lambda x: float(R.evaluate(x, 0.5, params.x0)), params.x0, 10.0 * s)
    slope_m = _lipschitz(lambda m: float(R.evaluate(params.x0, 0.5, m)), params.x0, 10.0 * s)
    half = 10.0 * max(s, params.T / (2.0 * params.c) * max(slope_x, slope_m))
    return _maximise(lambda m: _state_objective(R, m, params), params.x0, half, STATE_SCAN_POINTS)


def mean_reward(R: RewardSpec) -> Callable:
    """``Pi(m) = int_0^1 R(r, m) dr`` for a rank and mean reward."""
    if isinstance(R, LinearQuantile):
        return lambda m: R.coefficients(m)[0]
    return lambda m: integrate_rank(lambda r: R.evaluate(0.0, r, m), R.breakpoints)


def price_of_anarchy(R: RewardSpec, params: ModelParams, *, bracket: tuple | None = None) -> WelfareReport:
    """Centralised welfare over the worst equilibrium value.

    Raises
    ------
    TrivialPoA
        For purely rank-based rewards, where the planner's optimum is zero effort
        with welfare ``int_0^1 R``.
    """
    if R.is_rank_only:
        raise TrivialPoA("price of anarchy is trivial for a purely rank-based reward: V_c equals int_0^1 R(r) dr")
    notes = ["worst equilibrium taken over the roots found by a finite scan"]
    if isinstance(R, StateMean):
        vc = centralized_value_state(R, params)
    elif R.uses_x:
        raise DomainError("no centralised welfare formula for rewards depending on state, rank and mean together")
    else:
        vc = centralized_value_rank(mean_reward(R), params)
    if not R.bounded and not isinstance(R, StateMean):
        notes.append("equilibria restricted to those with finite beta")
    eqs = solve_equilibrium(R, params, bracket=bracket)
    values = [e.value for e in eqs]
    worst = min(values)
    poa = vc.value / worst if worst > 0 else math.inf
    if vc.value < max(values) - 1e-8:
        notes.append("centralised value below an equilibrium value; check the scan bracket")
    return WelfareReport(vc.value, vc.m_star, values, poa, tuple(notes))
