"""Mean-field equilibria of the tournament.

For a reward depending on rank and population mean, an equilibrium with mean
``m`` has the explicit quantile function

    q(r) = x0 + sigma sqrt(T) N^{-1}(y(r)),   y(r) = int_0^r e^{-R(z, m)/kappa} dz / Z,

with ``Z = int_0^1 e^{-R(z, m)/kappa} dz``, normaliser ``beta = 1 / Z`` and game
value ``-kappa ln Z``. The mean itself solves the scalar equation
``m = g(m) := x0 + sigma sqrt(T) int_0^1 N^{-1}(y(r)) dr``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .best_response import beta_of, reward_tilt, tilt_is_unbounded
from .core import FIXED_POINT_TOL, LOG_SQRT_2PI, ModelParams, log_f0, max_threads, normal_score
from .errors import DomainError, SolverError, UnboundedValue
from .grid import DEFAULT_RANK_NODES, DistributionGrid, Kinks, rank_grid, rank_quadrature, tilted_stats
from .reward import RewardSpec, StateMean

SCAN_POINTS = 10_000
COARSE_NODES = 256
PICARD_DAMPING = 0.5


@dataclass(frozen=True)
class EquilibriumResult:
    """One mean-field equilibrium.

    Attributes
    ----------
    distribution : DistributionGrid
        Equilibrium terminal law.
    mean : float
        Population mean ``m_mu``.
    beta : float
        Normaliser ``beta(mu)``.
    value : float
        Game value ``kappa ln beta``.
    residual : float
        Sup-norm defect of the fixed-point equation, relative to ``f0``.
    log_beta : float
    notes : tuple of str
        Caveats attached by the solver.
    """

    distribution: DistributionGrid
    mean: float
    beta: float
    value: float
    residual: float
    log_beta: float
    notes: tuple = field(default=())

    def effort(self, params: ModelParams) -> float:
        """Total effort ``m_mu - x0``."""
        return self.mean - params.x0


# rank / mean rewards ------------------------------------------------------------------


def _exponent(R: RewardSpec, m, params: ModelParams, r, floor):
    """``-R(r, m) / kappa`` with validation of the reward values."""
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.asarray(R.evaluate(0.0, r, m), dtype=float)
    if np.any(np.isnan(vals)):
        raise DomainError(f"reward is undefined at population mean {m}")
    if floor is not None:
        vals = np.maximum(vals, floor)
    elif np.any(vals == -np.inf):
        raise DomainError("reward is -inf on a set of positive measure; exp(-R/kappa) is not integrable")
    return -vals / params.two_c_sigma2


def _check_lower_tail(R: RewardSpec, m, params: ModelParams, floor) -> None:
    """Reject rewards with ``exp(-R/kappa)`` non-integrable at rank zero.

    In ``t = -ln r`` the integrand is ``exp(e(t) - t)``; divergence shows up as a
    slope ``de/dt >= 1`` that does not decay between ``t = 16`` and ``t = 32``.
    """
    if R.bounded:
        return
    t = np.array([16.0, 24.0, 32.0])
    e = _exponent(R, m, params, np.exp(-t), floor)
    if not np.all(np.isfinite(e)):
        raise DomainError("exp(-R/kappa) is not integrable near rank zero")
    slopes = np.diff(e) / 8.0
    if slopes[1] >= 1.0 and slopes[1] >= 0.95 * slopes[0]:
        raise DomainError("exp(-R/kappa) is not integrable near rank zero")


class _RankSolution:
    """Transformed c.d.f. ``y`` on a rank quadrature, shared by quantile and mean."""

    def __init__(self, R: RewardSpec, m, params: ModelParams, n: int, floor=None):
        _check_lower_tail(R, m, params, floor)
        rq = rank_quadrature(n, tuple(R.breakpoints))
        e = _exponent(R, m, params, rq.nodes, floor)
        shift = float(np.max(e))
        cum = rq.cumulative(np.exp(e - shift))
        if not (cum.total > 0 and math.isfinite(cum.total)):
            raise DomainError("exp(-R/kappa) is not integrable")
        self.rq = rq
        self.cum = cum
        self.log_Z = shift + math.log(cum.total)
        self.params = params

    def mean(self) -> float:
        z = normal_score(self.cum.lower_nodes / self.cum.total, self.cum.upper_nodes / self.cum.total)
        return self.params.x0 + self.params.scale * self.rq.integral(z)

    def node_scores(self):
        idx = self.rq.node_edges
        return normal_score(self.cum.lower_edges[idx] / self.cum.total, self.cum.upper_edges[idx] / self.cum.total)


def _rank_law(R: RewardSpec, m, params: ModelParams, n: int, floor=None):
    sol = _RankSolution(R, m, params, n, floor)
    grid = rank_grid(n)
    z = sol.node_scores()
    e_nodes = _exponent(R, m, params, grid.nodes, floor)
    # f(q(r)) = phi(z) Z e^{R/kappa} / s, assembled in logs
    log_f = -0.5 * z * z - LOG_SQRT_2PI - math.log(params.scale) + sol.log_Z - e_nodes
    law = DistributionGrid(
        r_nodes=grid.nodes,
        r_upper=grid.upper,
        q_values=params.x0 + params.scale * z,
        density_values=np.exp(log_f),
        mean=sol.mean(),
        weights=grid.weights,
        breakpoints=tuple(R.breakpoints),
        kinks=_kinks(R, m, params, sol, floor),
    )
    return law, sol.log_Z


def _kinks(R, m, params, sol: "_RankSolution", floor) -> Kinks | None:
    if not R.breakpoints:
        return None
    b = np.asarray(R.breakpoints, dtype=float)
    edges = sol.rq.edges
    j = np.clip(np.searchsorted(edges, b), 1, len(edges) - 1)
    j = np.where(np.abs(edges[j - 1] - b) < np.abs(edges[j] - b), j - 1, j)
    total = sol.cum.total
    z = normal_score(sol.cum.lower_edges[j] / total, sol.cum.upper_edges[j] / total)
    base = -0.5 * z * z - LOG_SQRT_2PI - math.log(params.scale) + sol.log_Z
    e_left = _exponent(R, m, params, np.nextafter(b, 0.0), floor)
    e_right = _exponent(R, m, params, np.nextafter(b, 1.0), floor)
    return Kinks(b, 1.0 - b, params.x0 + params.scale * z, np.exp(base - e_left), np.exp(base - e_right))


def equilibrium_quantile(
    R: RewardSpec, m: float, params: ModelParams, n: int = DEFAULT_RANK_NODES, floor: float | None = None
) -> DistributionGrid:
    """Equilibrium law of the rank reward ``r -> R(r, m)`` at a frozen mean ``m``.

    Parameters
    ----------
    floor : float, optional
        Reward values below ``floor`` are raised to it inside ``exp(-R/kappa)``.
        Without a floor a reward equal to ``-inf`` at a grid node is rejected.

    Raises
    ------
    DomainError
        If ``exp(-R/kappa)`` is not integrable over the ranks.
    """
    if R.uses_x:
        raise DomainError("the quantile formula applies to rank and mean rewards")
    return _rank_law(R, m, params, n, floor)[0]


def equilibrium_mean_map(R: RewardSpec, m: float, params: ModelParams, n: int = DEFAULT_RANK_NODES) -> float:
    """``g(m)``: mean of the equilibrium law of ``R(., m)``."""
    if isinstance(R, StateMean):
        return _tilted_mean(R, m, params)
    return _RankSolution(R, m, params, n).mean()


def _coarse_map(R, params, n):
    return lambda m: equilibrium_mean_map(R, m, params, n)


# state / mean rewards -----------------------------------------------------------------


def _tilted_mean(R: StateMean, m: float, params: ModelParams) -> float:
    """Mean of ``f0 exp(R(x, m)/kappa)`` normalised."""
    return tilted_stats(lambda x: log_f0(params, x) + R.evaluate(x, 0.5, m) / params.two_c_sigma2, params)[1]


# scalar fixed point -------------------------------------------------------------------


def _bracket_halfwidth(R: RewardSpec, params: ModelParams) -> float:
    """``sigma sqrt(T) C sqrt(2/pi)`` with ``C = exp(sup_m |R(1, m) - R(0, m)| / kappa)``."""
    if not R.bounded:
        return math.inf
    grid = rank_grid(COARSE_NODES)
    lo_r, hi_r = grid.nodes[0], grid.nodes[-1]
    m_lo, m_hi = getattr(R, "m_range", (params.x0 - 50 * params.scale, params.x0 + 50 * params.scale))
    ms = np.linspace(min(m_lo, params.x0 - 50 * params.scale), max(m_hi, params.x0 + 50 * params.scale), 2001)
    spread = np.asarray(R.evaluate(0.0, np.full_like(ms, hi_r), ms)) - np.asarray(R.evaluate(0.0, np.full_like(ms, lo_r), ms))
    log_C = float(np.max(np.abs(spread))) / params.two_c_sigma2
    if log_C > 50:
        return math.inf
    return params.scale * math.exp(log_C) * math.sqrt(2.0 / math.pi)


def _scan(h, ms: np.ndarray, threads: int) -> np.ndarray:
    if threads <= 1:
        return np.array([h(m) for m in ms])
    chunks = np.array_split(ms, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda c: np.array([h(m) for m in c]), chunks))
    return np.concatenate(parts)


def solve_mean_fixed_point(
    R: RewardSpec,
    params: ModelParams,
    *,
    bracket: tuple | None = None,
    scan_points: int = SCAN_POINTS,
    coarse_nodes: int = COARSE_NODES,
    n: int = DEFAULT_RANK_NODES,
    tol: float = FIXED_POINT_TOL,
    threads: int | None = None,
) -> list[float]:
    """All roots of ``m = g(m)`` found by a sign scan followed by bracketed refinement.

    The scan covers ``|m - x0| <= sigma sqrt(T) C sqrt(2/pi)`` (the range of ``g``)
    unless ``bracket`` is given; for unbounded rewards a bracket is required.
    Completeness is limited by the scan resolution: two roots closer than one scan
    cell with no tangency may be missed.

    Raises
    ------
    SolverError
        If no root is found.
    """
    if not R.uses_m:
        return [equilibrium_mean_map(R, params.x0, params, n)]
    if bracket is None:
        half = _bracket_halfwidth(R, params)
        if not math.isfinite(half):
            raise SolverError("reward is unbounded or too steep for the a-priori bracket; pass bracket=(lo, hi)")
        bracket = (params.x0 - half, params.x0 + half)
    lo, hi = map(float, bracket)
    threads = max_threads() if threads is None else max(1, int(threads))
    coarse = _coarse_map(R, params, coarse_nodes)
    fine = _coarse_map(R, params, n)
    ms = np.linspace(lo, hi, scan_points)
    hv = _scan(lambda m: coarse(m) - m, ms, threads)
    h_fine = lambda m: fine(m) - m

    roots: list[float] = []
    cell = ms[1] - ms[0]

    def refine(a, b):
        ha, hb = h_fine(a), h_fine(b)
        widen = 0
        while np.sign(ha) == np.sign(hb) and ha != 0 and widen < 8:
            a, b = max(lo, a - cell), min(hi, b + cell)
            ha, hb = h_fine(a), h_fine(b)
            widen += 1
        if ha == 0:
            return a
        if hb == 0:
            return b
        if np.sign(ha) == np.sign(hb):
            return None
        return brentq(h_fine, a, b, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500)

    sign = np.sign(hv)
    for i in np.flatnonzero(sign[:-1] * sign[1:] < 0):
        root = refine(ms[i], ms[i + 1])
        if root is not None:
            roots.append(root)
    for i in np.flatnonzero(sign == 0):
        roots.append(float(ms[i]))
    # tangential roots: local minima of |h| close to zero without a sign change
    ah = np.abs(hv)
    for i in range(1, len(ms) - 1):
        if ah[i] <= ah[i - 1] and ah[i] <= ah[i + 1] and ah[i] < 1e-6 and sign[i - 1] == sign[i + 1] != 0:
            res = minimize_scalar(lambda m: abs(h_fine(m)), bounds=(ms[i - 1], ms[i + 1]), method="bounded", options={"xatol": tol})
            if res.fun < 10 * tol:
                roots.append(float(res.x))
    roots = sorted(roots)
    merged: list[float] = []
    for r in roots:
        if not merged or abs(r - merged[-1]) > 10 * tol:
            merged.append(r)
    if not merged:
        raise SolverError(f"no root of m = g(m) on [{lo}, {hi}] although one must exist; refine the scan")
    return merged


def picard_mean(
    R: RewardSpec,
    params: ModelParams,
    m0: float | None = None,
    *,
    damping: float = PICARD_DAMPING,
    tol: float = 1e-12,
    max_iter: int = 1000,
    n: int = DEFAULT_RANK_NODES,
) -> float:
    """Damped Picard iteration ``m <- (1 - d) m + d g(m)`` for the equilibrium mean."""
    m = params.x0 if m0 is None else float(m0)
    for _ in range(max_iter):
        new = (1.0 - damping) * m + damping * equilibrium_mean_map(R, m, params, n)
        if abs(new - m) < tol:
            return new
        m = new
    raise SolverError("damped Picard iteration did not converge")


# verification -------------------------------------------------------------------------


def verify_fixed_point(mu: DistributionGrid, R: RewardSpec, params: ModelParams) -> float:
    """``sup |f_mu - f0 exp(R_mu / kappa) / beta(mu)| / f0`` over the grid."""
    log_beta = beta_of(R, mu, params, log=True)
    if not math.isfinite(log_beta):
        raise UnboundedValue("beta(mu) is infinite")
    tilt = reward_tilt(R, mu, params)(mu.q_values)
    zeta = np.exp(mu.log_zeta_nodes(params))
    target = np.exp(tilt - log_beta)
    return float(np.max(np.abs(zeta - target)))


def _result(law: DistributionGrid, log_beta: float, R: RewardSpec, params: ModelParams, notes=()) -> EquilibriumResult:
    residual = verify_fixed_point(law, R, params)
    return EquilibriumResult(
        distribution=law,
        mean=law.mean,
        beta=math.exp(log_beta),
        value=params.two_c_sigma2 * log_beta,
        residual=residual,
        log_beta=log_beta,
        notes=tuple(notes),
    )


def solve_equilibrium(
    R: RewardSpec,
    params: ModelParams,
    *,
    n: int = DEFAULT_RANK_NODES,
    bracket: tuple | None = None,
    floor: float | None = None,
    threads: int | None = None,
) -> list[EquilibriumResult]:
    """Every equilibrium found for ``R``, one per root of the mean equation.

    Rank-only rewards have exactly one equilibrium. State-mean rewards are solved
    through the scalar equation ``m = mean of f0 exp(R(x, m)/kappa)``.

    Raises
    ------
    DomainError
        If ``exp(-R/kappa)`` is not integrable.
    """
    if isinstance(R, StateMean):
        return _solve_state_mean(R, params, n=n, bracket=bracket, threads=threads)
    if R.uses_x:
        raise DomainError(f"no equilibrium solver for {R.kind} rewards")
    notes = []
    if not R.bounded:
        notes.append("unbounded reward: uniqueness of the equilibrium is not guaranteed")
    if R.uses_m:
        means = solve_mean_fixed_point(R, params, bracket=bracket, n=n, threads=threads)
        notes.append("roots found on a finite scan; completeness limited by scan resolution")
    else:
        means = [params.x0]
    out = []
    for m in means:
        law, log_Z = _rank_law(R, m, params, n, floor)
        out.append(_result(law, -log_Z, R, params, notes))
    return out


def _solve_state_mean(R: StateMean, params: ModelParams, *, n, bracket, threads) -> list[EquilibriumResult]:
    h = lambda m: _tilted_mean(R, m, params) - m
    probe = np.array([_tilted_mean(R, m, params) for m in (params.x0 - params.scale, params.x0, params.x0 + params.scale)])
    if np.ptp(probe) < 1e-13 and bracket is None:
        means = [float(probe[1])]
        notes = ()
    else:
        if bracket is None:
            half = 10.0 * params.scale + 2.0 * abs(probe[1] - params.x0)
            bracket = (params.x0 - half, params.x0 + half)
        ms = np.linspace(bracket[0], bracket[1], 1001)
        threads = max_threads() if threads is None else max(1, int(threads))
        hv = _scan(h, ms, threads)
        means = []
        for i in np.flatnonzero(np.sign(hv[:-1]) * np.sign(hv[1:]) <= 0):
            if hv[i] == 0:
                means.append(float(ms[i]))
            elif hv[i + 1] != 0:
                means.append(brentq(h, ms[i], ms[i + 1], xtol=FIXED_POINT_TOL))
        if not means:
            raise SolverError("no root of the state-mean fixed point on the bracket")
        notes = ("roots found on a finite scan; completeness limited by scan resolution",)
    out = []
    grid = rank_grid(n)
    for m in means:
        tilt = lambda x, m=m: R.evaluate(x, 0.5, m) / params.two_c_sigma2
        if tilt_is_unbounded(tilt, params):
            raise UnboundedValue("beta(mu) is infinite")
        law = DistributionGrid.from_log_density(lambda x, t=tilt: log_f0(params, x) + t(x), params, grid)
        out.append(_result(law, law.log_normaliser, R, params, notes))
    return out


def total_effort(R: RewardSpec, params: ModelParams, n: int = DEFAULT_RANK_NODES) -> float:
    """``A(R) = m_mu - x0 = sigma sqrt(T) int_0^1 N^{-1}(y(r)) dr`` for a rank-only reward."""
    if R.uses_x or R.uses_m:
        raise DomainError("total effort is defined here for rank-only rewards")
    return _RankSolution(R, None, params, n).mean() - params.x0


def game_value(R: RewardSpec, m: float, params: ModelParams, n: int = DEFAULT_RANK_NODES) -> float:
    """``-kappa ln int_0^1 exp(-R(z, m)/kappa) dz``."""
    return -params.two_c_sigma2 * _RankSolution(R, m, params, n).log_Z
