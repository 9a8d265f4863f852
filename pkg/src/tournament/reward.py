"""Reward functions ``R(x, r, m)`` and the Lorenz order on rank-based rewards.

Four structural classes are supported, each as a subclass of :class:`RewardSpec`:

* :class:`PureRank` and :class:`PiecewiseRank` depend on rank only;
* :class:`RankMean` depends on rank and population mean;
* :class:`StateMean` depends on own terminal value and population mean;
* :class:`LinearQuantile` is the unbounded family ``a(m) + b(m) N^{-1}(r)``
  that arises in the effort-maximising design.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtri

from .errors import DomainError, InvalidReward
from .grid import DEFAULT_RANK_NODES, rank_quadrature

MONOTONE_SAMPLES = 1000
MONOTONE_TOL = 1e-12


def _vectorised(fn: Callable, nargs: int) -> Callable:
    """Return ``fn`` if it broadcasts over arrays, otherwise a ``np.vectorize`` wrapper."""
    probe = [np.array([0.25, 0.75])] * nargs
    try:
        out = np.asarray(fn(*probe), dtype=float)
        if out.shape == (2,):
            return fn
    except Exception:  # noqa: BLE001 - scalar-only callables raise arbitrary errors
        pass
    return np.vectorize(fn, otypes=[float])


def _check_monotone(values: np.ndarray, what: str) -> None:
    values = np.asarray(values, dtype=float)
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        raise InvalidReward(f"{what}: reward is not finite on the sample")
    scale = 1.0 + float(np.max(np.abs(finite)))
    steps = np.diff(values, axis=-1)
    if np.any(steps < -MONOTONE_TOL * scale):
        raise InvalidReward(f"{what}: reward must be nondecreasing")


def _interior(n: int = MONOTONE_SAMPLES) -> np.ndarray:
    return (np.arange(n) + 0.5) / n


class RewardSpec:
    """Base class of all reward representations.

    Subclasses set the class attributes ``kind``, ``uses_x``, ``uses_r`` and
    ``uses_m``; ``breakpoints`` lists ranks where the reward jumps.
    """

    kind = "abstract"
    uses_x = False
    uses_r = False
    uses_m = False
    bounded = True
    bounds: tuple | None = None
    breakpoints: tuple = ()

    def __call__(self, x, r, m):
        return self.evaluate(x, r, m)

    def evaluate(self, x, r, m):
        raise NotImplementedError

    @property
    def is_rank_only(self) -> bool:
        return self.uses_r and not self.uses_x and not self.uses_m

    def rank_fn(self, m: float | None = None) -> Callable:
        """``r -> R(r, m)`` for rewards that do not depend on ``x``."""
        if self.uses_x:
            raise DomainError(f"{self.kind} reward depends on the state, not only on rank")
        return lambda r: self.evaluate(0.0, r, m)

    def on_law(self, mu) -> Callable:
        """``x -> R(x, F_mu(x), m_mu)``, the reward faced against population law ``mu``."""
        m = mu.mean
        if self.uses_r:
            return lambda x: self.evaluate(x, mu.cdf(x), m)
        return lambda x: self.evaluate(x, 0.5, m)

    def x_breakpoints(self, mu) -> tuple:
        """Terminal values where ``on_law(mu)`` jumps."""
        if not self.breakpoints:
            return ()
        return tuple(float(v) for v in np.atleast_1d(mu.quantile(np.asarray(self.breakpoints))))

    def shift(self, constant: float) -> "RewardSpec":
        raise NotImplementedError

    def __add__(self, constant):
        return self.shift(float(constant))

    __radd__ = __add__


class PiecewiseRank(RewardSpec):
    """Step reward ``R_i`` on ``[e_{i-1}, e_i)``, with ``R(1) = R_n``.

    ``edges`` defaults to the uniform partition ``i / n``.
    """

    kind = "piecewise_rank"
    uses_r = True

    def __init__(self, levels: Sequence[float], edges: Sequence[float] | None = None):
        levels = np.asarray(levels, dtype=float)
        if levels.ndim != 1 or levels.size == 0 or not np.all(np.isfinite(levels)):
            raise InvalidReward("levels must be a non-empty finite vector")
        if np.any(np.diff(levels) < 0):
            raise InvalidReward("piecewise-rank levels must be nondecreasing")
        n = levels.size
        if edges is None:
            edges = np.linspace(0.0, 1.0, n + 1)
        edges = np.asarray(edges, dtype=float)
        if edges.size != n + 1 or edges[0] != 0.0 or edges[-1] != 1.0 or np.any(np.diff(edges) <= 0):
            raise InvalidReward("edges must increase strictly from 0 to 1 with one more entry than levels")
        self.levels = levels
        self.edges = edges
        self.bounds = (float(levels[0]), float(levels[-1]))
        self.breakpoints = tuple(float(e) for e, a, b in zip(edges[1:-1], levels[:-1], levels[1:]) if b != a)

    def evaluate(self, x, r, m):
        r = np.asarray(r, dtype=float)
        idx = np.clip(np.searchsorted(self.edges, r, side="right") - 1, 0, self.levels.size - 1)
        out = self.levels[idx]
        return np.broadcast_to(out, np.broadcast(np.asarray(x), r).shape) * 1.0 if np.ndim(x) else out

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def mean(self) -> float:
        return float(np.dot(self.levels, self.widths))

    def shift(self, constant):
        return PiecewiseRank(self.levels + constant, self.edges)

    def __repr__(self):
        return f"PiecewiseRank(levels={self.levels.tolist()}, edges={self.edges.tolist()})"


def constant(value: float) -> PiecewiseRank:
    """The uniform reward ``R = value``."""
    return PiecewiseRank([value])


class PureRank(RewardSpec):
    """Reward ``R(r)`` given by a callable on the unit interval.

    Parameters
    ----------
    fn : callable
        Nondecreasing function of rank; checked on a 1000-point sample.
    bounded : bool
        Whether the reward is bounded on (0, 1).
    breakpoints : sequence of float
        Ranks where ``fn`` jumps; used to split quadratures.
    """

    kind = "pure_rank"
    uses_r = True

    def __init__(self, fn: Callable, bounded: bool = True, breakpoints: Sequence[float] = (), name: str = ""):
        self.fn = _vectorised(fn, 1)
        samples = np.asarray(self.fn(_interior()), dtype=float)
        _check_monotone(samples, "pure-rank")
        self.bounded = bool(bounded)
        self.bounds = (float(np.min(samples)), float(np.max(samples))) if bounded else None
        self.breakpoints = tuple(sorted(float(b) for b in breakpoints))
        self.name = name

    def evaluate(self, x, r, m):
        return np.asarray(self.fn(np.asarray(r, dtype=float)), dtype=float)

    def shift(self, constant):
        fn = self.fn
        return PureRank(lambda r: fn(r) + constant, self.bounded, self.breakpoints, self.name)

    def __repr__(self):
        return f"PureRank({self.name or self.fn!r})"


class RankMean(RewardSpec):
    """Reward ``R(r, m)`` depending on rank and the population mean."""

    kind = "rank_mean"
    uses_r = True
    uses_m = True

    def __init__(
        self,
        fn: Callable,
        bounded: bool = True,
        breakpoints: Sequence[float] = (),
        m_range: tuple = (-10.0, 10.0),
        name: str = "",
    ):
        self.fn = _vectorised(fn, 2)
        r = _interior()
        ms = np.linspace(*m_range, MONOTONE_SAMPLES)
        for m in np.linspace(*m_range, 5):
            _check_monotone(self.fn(r, np.full_like(r, m)), "rank-mean (in r)")
        for rr in (0.05, 0.25, 0.5, 0.75, 0.95):
            _check_monotone(self.fn(np.full_like(ms, rr), ms), "rank-mean (in m)")
        self.bounded = bool(bounded)
        self.breakpoints = tuple(sorted(float(b) for b in breakpoints))
        self.m_range = tuple(m_range)
        self.name = name

    def evaluate(self, x, r, m):
        r = np.asarray(r, dtype=float)
        return np.asarray(self.fn(r, np.broadcast_to(np.asarray(m, dtype=float), r.shape)), dtype=float)

    def shift(self, constant):
        fn = self.fn
        return RankMean(lambda r, m: fn(r, m) + constant, self.bounded, self.breakpoints, self.m_range, self.name)

    def __repr__(self):
        return f"RankMean({self.name or self.fn!r})"


class StateMean(RewardSpec):
    """Reward ``R(x, m)`` depending on own terminal value and the population mean."""

    kind = "state_mean"
    uses_x = True
    uses_m = True

    def __init__(self, fn: Callable, x_range: tuple = (-10.0, 10.0), m_range: tuple = (-10.0, 10.0), name: str = ""):
        self.fn = _vectorised(fn, 2)
        xs = np.linspace(*x_range, MONOTONE_SAMPLES)
        ms = np.linspace(*m_range, MONOTONE_SAMPLES)
        for m in np.linspace(*m_range, 5):
            _check_monotone(self.fn(xs, np.full_like(xs, m)), "state-mean (in x)")
        for x in np.linspace(*x_range, 5):
            _check_monotone(self.fn(np.full_like(ms, x), ms), "state-mean (in m)")
        self.bounded = False
        self.name = name

    def evaluate(self, x, r, m):
        x = np.asarray(x, dtype=float)
        return np.asarray(self.fn(x, np.broadcast_to(np.asarray(m, dtype=float), x.shape)), dtype=float)

    def rank_fn(self, m=None):
        raise DomainError("state-mean reward has no rank representation")

    def shift(self, constant):
        fn = self.fn
        return StateMean(lambda x, m: fn(x, m) + constant, name=self.name)

    def __repr__(self):
        return f"StateMean({self.name or self.fn!r})"


class LinearQuantile(RewardSpec):
    """Unbounded reward ``R(r, m) = a(m) + b(m) N^{-1}(r)`` with ``b >= 0``.

    ``a`` and ``b`` are numbers or callables of the population mean. Against a
    law ``mu`` the reward is composed through the normal score of ``F_mu``,
    which stays exact in both tails.
    """

    kind = "linear_quantile"
    uses_r = True
    bounded = False

    def __init__(self, a, b, name: str = ""):
        self.a = a
        self.b = b
        self.uses_m = callable(a) or callable(b)
        if not self.uses_m and (not math.isfinite(b) or b < 0):
            raise InvalidReward("linear-quantile slope must be finite and nonnegative")
        self.name = name

    def coefficients(self, m=None) -> tuple[float, float]:
        a = self.a(m) if callable(self.a) else self.a
        b = self.b(m) if callable(self.b) else self.b
        if not (b >= 0):
            raise InvalidReward("linear-quantile slope must be nonnegative")
        return float(a), float(b)

    def evaluate(self, x, r, m):
        a, b = self.coefficients(m)
        with np.errstate(divide="ignore"):
            return a + b * ndtri(np.asarray(r, dtype=float))

    def on_law(self, mu):
        a, b = self.coefficients(mu.mean)
        return lambda x: a + b * mu.normal_score(x)

    def shift(self, constant):
        a = self.a
        new_a = (lambda m: a(m) + constant) if callable(a) else a + constant
        return LinearQuantile(new_a, self.b, self.name)

    def __repr__(self):
        return f"LinearQuantile({self.name or (self.a, self.b)!r})"


def eval_reward(R: RewardSpec, x, r, m):
    """``R(x, r, m)``; rank must lie in ``[0, 1]``."""
    r_arr = np.asarray(r, dtype=float)
    if np.any((r_arr < 0) | (r_arr > 1)):
        raise DomainError("rank must lie in [0, 1]")
    return R.evaluate(x, r, m)


def _rank_partial_sums(R: RewardSpec, Rt: RewardSpec, n: int = DEFAULT_RANK_NODES):
    if isinstance(R, PiecewiseRank) and isinstance(Rt, PiecewiseRank):
        z = np.union1d(R.edges, Rt.edges)

        def partial(P):
            cum = np.concatenate([[0.0], np.cumsum(P.levels * P.widths)])
            return np.interp(z, P.edges, cum)

        return z, partial(R), partial(Rt)
    bps = tuple(sorted(set(R.breakpoints) | set(Rt.breakpoints)))
    rq = rank_quadrature(n, bps)
    a = rq.cumulative(R.rank_fn()(rq.nodes))
    b = rq.cumulative(Rt.rank_fn()(rq.nodes))
    return rq.edges, a.lower_edges, b.lower_edges


def lorenz_majorizes(R: RewardSpec, Rt: RewardSpec, tol: float = 1e-10, *, return_table: bool = False):
    """Whether ``R`` is more unequal than ``Rt`` in the Lorenz order.

    Equal totals and ``int_0^z R <= int_0^z Rt`` for every ``z`` on the grid of
    partial sums (the union of step edges for two step rewards, where the check
    is exact).
    """
    for P in (R, Rt):
        if not P.is_rank_only:
            raise DomainError("Lorenz order compares rank-only rewards")
    z, a, b = _rank_partial_sums(R, Rt)
    ok = abs(a[-1] - b[-1]) <= tol and bool(np.all(a <= b + tol))
    if return_table:
        return ok, (z, a, b)
    return ok


def discretize_reward(R: RewardSpec, n: int) -> PiecewiseRank:
    """Step reward on ``n`` equal bins whose partial sums match ``int_0^{k/n} R``."""
    if not R.is_rank_only:
        raise DomainError("discretisation applies to rank-only rewards")
    if n < 1:
        raise DomainError("n must be positive")
    cuts = np.linspace(0.0, 1.0, n + 1)
    rq = rank_quadrature(DEFAULT_RANK_NODES, tuple(sorted(set(cuts[1:-1]) | set(R.breakpoints))))
    cum = rq.cumulative(R.rank_fn()(rq.nodes)).lower_edges
    partial = np.interp(cuts, rq.edges, cum)
    levels = n * np.diff(partial)
    # mean-value levels of a nondecreasing reward are nondecreasing up to rounding
    levels = np.maximum.accumulate(levels)
    return PiecewiseRank(levels)
