"""The hitting-time ranking game: a Schrodinger bridge in time instead of space.

A player's state starts at ``x0 > 0`` and is ranked by the first time ``tau``
it reaches zero. Without effort ``tau`` follows the first-passage law of level
``x0 / sigma`` for a standard Brownian motion. A reward ``R(t)`` is paid on
``tau = t <= T`` and ``R_inf`` if zero is not reached by ``T``. The best response
tilts the first-passage law on ``[0, T]`` and rescales the atom at infinity:

    V = kappa ln( int_0^T f0(t) exp(R(t)/kappa) dt + (1 - F0(T)) exp(R_inf/kappa) ).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate as sp_integrate
from scipy.special import erf, ndtr

from .core import ModelParams
from .errors import DomainError, InvalidReward, QuadratureError

#: Probe points per unit horizon when checking that ``R`` is bounded.
BOUND_PROBES = 1001
QUAD_EPS = 1e-13


def _require_positive_start(params: ModelParams) -> None:
    if not params.x0 > 0:
        raise DomainError("hitting-time game needs x0 > 0: the level is already reached at the start")


@dataclass(frozen=True)
class HittingReward:
    """Reward ``R(t)`` for hitting zero at ``t <= T`` and ``R_inf`` for not hitting by ``T``.

    Parameters
    ----------
    R : callable
        Vectorised function of ``t`` on ``[0, T]``. It must be bounded there.
    R_inf : float
    breakpoints : tuple of float
        Discontinuities of ``R`` inside ``(0, T)``, passed to the quadrature.
    """

    R: Callable
    R_inf: float
    breakpoints: tuple = ()

    def __post_init__(self):
        if not math.isfinite(float(self.R_inf)):
            raise InvalidReward("R_inf must be finite")

    def evaluate(self, t):
        return np.asarray(self.R(np.asarray(t, dtype=float)), dtype=float)

    def check(self, params: ModelParams) -> float:
        """Validate boundedness on ``[0, T]`` and return ``max R`` over the probes."""
        ts = np.linspace(0.0, params.T, BOUND_PROBES)
        vals = np.broadcast_to(self.evaluate(ts), ts.shape)
        if not np.all(np.isfinite(vals)):
            raise InvalidReward("hitting reward must be finite on [0, T]")
        return float(np.max(vals))


@dataclass(frozen=True)
class FirstPassageLaw:
    """Law of the first time ``x0 + sigma B_t`` reaches zero."""

    params: ModelParams

    def __post_init__(self):
        _require_positive_start(self.params)

    @property
    def a(self) -> float:
        """``x0^2 / (2 sigma^2)``, the scale of the substitution ``t = a / v^2``."""
        return self.params.x0**2 / (2.0 * self.params.sigma**2)

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        x0, sigma = self.params.x0, self.params.sigma
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = x0 / (sigma * math.sqrt(2.0 * math.pi)) * t**-1.5 * np.exp(-(x0**2) / (2.0 * sigma**2 * t))
        return np.where(t > 0, out, 0.0)

    def cdf(self, t):
        """``F0(t) = 2 (1 - N(x0 / (sigma sqrt t)))`` by the reflection principle."""
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            z = self.params.x0 / (self.params.sigma * np.sqrt(np.maximum(t, 0.0)))
        return 2.0 * ndtr(-z)

    def sf(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            z = self.params.x0 / (self.params.sigma * np.sqrt(np.maximum(t, 0.0)))
        return erf(z / math.sqrt(2.0))

    @property
    def atom_mass(self) -> float:
        """``1 - F0(T)``, the probability of not reaching zero by the horizon."""
        return float(self.sf(self.params.T))


def first_passage_density(params: ModelParams, t):
    """First-passage density ``x0 / (sigma sqrt(2 pi)) t^{-3/2} exp(-x0^2 / (2 sigma^2 t))``.

    Raises
    ------
    DomainError
        If ``x0 <= 0``.
    """
    return FirstPassageLaw(params).pdf(t)


def first_passage_cdf(params: ModelParams, t):
    """``P(tau <= t)`` for the uncontrolled first-passage time."""
    return FirstPassageLaw(params).cdf(t)


@dataclass(frozen=True)
class HittingDensity:
    """Optimal law of the controlled hitting time.

    Attributes
    ----------
    t_nodes, density_values : ndarray
        Density of ``tau`` on ``[0, T]`` tabulated on a grid.
    hit_mass : float
        ``P(tau <= T)``.
    atom_mass : float
        ``P(tau > T) = 1 - hit_mass``.
    """

    t_nodes: np.ndarray
    density_values: np.ndarray
    hit_mass: float
    atom_mass: float
    log_normaliser: float
    reward: HittingReward
    prior: FirstPassageLaw

    def pdf(self, t):
        kappa = self.prior.params.two_c_sigma2
        t = np.asarray(t, dtype=float)
        inside = (t > 0) & (t <= self.prior.params.T)
        tc = np.clip(t, 0.0, self.prior.params.T)
        with np.errstate(over="ignore", invalid="ignore"):
            val = self.prior.pdf(tc) * np.exp(self.reward.evaluate(tc) / kappa - self.log_normaliser)
        return np.where(inside, val, 0.0)


class HittingValue(NamedTuple):
    value: float
    density: HittingDensity
    beta: float


def _hit_integral(hr: HittingReward, law: FirstPassageLaw, shift: float) -> float:
    """``int_0^T f0(t) exp((R(t) - shift)/kappa) dt`` after ``t = a / v^2``.

    The substitution sends ``f0(t) dt`` to ``(2/sqrt(pi)) exp(-v^2) dv`` on
    ``[sqrt(a/T), inf)``, removing the essential singularity at ``t = 0``.
    """
    p = law.params
    kappa = p.two_c_sigma2
    a = law.a
    v_T = math.sqrt(a / p.T)

    def g(v):
        return 2.0 / math.sqrt(math.pi) * math.exp(-v * v + (float(hr.evaluate(a / (v * v))) - shift) / kappa)

    # the Gaussian factor is below 1e-300 beyond v = 27
    v_end = max(v_T, 0.0) + 27.0
    points = sorted(math.sqrt(a / b) for b in hr.breakpoints if 0.0 < b < p.T)
    cuts = [v_T, *points, v_end]
    total, err = 0.0, 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= lo:
            continue
        val, e = sp_integrate.quad(g, lo, hi, epsabs=0.0, epsrel=QUAD_EPS, limit=500)
        total += val
        err += e
    if not math.isfinite(total) or err > 1e-9 * max(total, 1e-300):
        raise QuadratureError(f"hit-by-T integral did not converge (estimate {total}, error {err})")
    return total


def hitting_value(hr: HittingReward, params: ModelParams, n_table: int = 201) -> HittingValue:
    """Value, optimal hitting-time law and hit-by-``T`` mass of the best response.

    Parameters
    ----------
    hr : HittingReward
    params : ModelParams
        ``x0 > 0`` is the distance to the level.
    n_table : int
        Number of tabulation points for the optimal density.

    Returns
    -------
    HittingValue
        ``value = kappa ln(I + (1 - F0(T)) e^{R_inf / kappa})`` with
        ``I = int_0^T f0 e^{R / kappa}``; ``beta = I / (I + (1 - F0(T)) e^{R_inf / kappa})``.

    Raises
    ------
    DomainError
        If ``x0 <= 0``.
    QuadratureError
        If the time integral fails.
    """
    law = FirstPassageLaw(params)
    kappa = params.two_c_sigma2
    shift = max(hr.check(params), float(hr.R_inf))
    hit = _hit_integral(hr, law, shift)
    miss = law.atom_mass * math.exp((float(hr.R_inf) - shift) / kappa)
    total = hit + miss
    log_norm = math.log(total) + shift / kappa
    beta = hit / total
    t = np.linspace(0.0, params.T, n_table)
    with np.errstate(over="ignore", invalid="ignore"):
        table = np.where(t > 0, law.pdf(t) * np.exp(hr.evaluate(t) / kappa - log_norm), 0.0)
    density = HittingDensity(t, table, beta, miss / total, log_norm, hr, law)
    return HittingValue(kappa * log_norm, density, beta)
