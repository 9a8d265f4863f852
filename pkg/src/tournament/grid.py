"""Rank grids, piecewise Gauss-Legendre rules and the quantile representation of laws.

Every rank integral ``int_0^1 ... dr`` in the package goes through the warped
rank grid defined here. The warp clusters nodes towards 0 and 1 where normal
quantiles diverge; ``1 - r`` is carried alongside ``r`` so that the upper tail
keeps full floating-point precision.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple, Sequence

import numpy as np
from numpy.polynomial import legendre as _leg
from scipy.integrate import simpson
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.special import ndtr, ndtri

from .core import GRID_TOL, LOG_SQRT_2PI, ModelParams, legendre01, log_f0, normal_score
from .errors import DomainError

DEFAULT_RANK_NODES = 4096
PIECE_ORDER = 8


@dataclass(frozen=True, eq=False)
class RankGrid:
    """Nodes in (0, 1), symmetric about 1/2, clustered near both ends.

    The nodes are Gauss-Legendre nodes mapped through the smoothstep warp
    ``r = 3 s^2 - 2 s^3`` (the regularised incomplete beta ``I_s(2, 2)``);
    ``weights`` integrate over ``dr`` including the warp Jacobian.
    """

    n: int = DEFAULT_RANK_NODES
    nodes: np.ndarray = field(init=False, repr=False)
    upper: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 4:
            raise DomainError("rank grid needs at least 4 nodes")
        s, w = legendre01(self.n)
        r = s * s * (3.0 - 2.0 * s)
        # Gauss-Legendre nodes are symmetric, so 1 - r is the reversed array
        upper = r[::-1].copy()
        half = self.n // 2
        r[half:] = 1.0 - upper[half:]
        object.__setattr__(self, "nodes", r)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "weights", w * 6.0 * s * (1.0 - s))


@functools.lru_cache(maxsize=8)
def rank_grid(n: int = DEFAULT_RANK_NODES) -> RankGrid:
    return RankGrid(n)


@functools.lru_cache(maxsize=4)
def _cumulative_matrix(order: int):
    """Nodes, weights and running-integral matrix of an ``order``-point rule on [0, 1].

    ``S @ f`` gives ``int_0^{xi_j} p(t) dt`` for the interpolating polynomial
    ``p`` of the samples ``f`` at the Gauss nodes ``xi``.
    """
    xi, w = legendre01(order)
    t = 2.0 * xi - 1.0
    vander = _leg.legvander(t, order - 1)
    running = np.empty((order, order))
    for k in range(order):
        coef = np.zeros(order)
        coef[k] = 1.0
        running[:, k] = _leg.legval(t, _leg.legint(coef, lbnd=-1.0))
    return xi, w, 0.5 * running @ np.linalg.inv(vander)


class Kinks(NamedTuple):
    """Quantile data at density discontinuities, one entry per breakpoint rank."""

    r: np.ndarray
    r_upper: np.ndarray
    q: np.ndarray
    f_left: np.ndarray
    f_right: np.ndarray


class Cumulative(NamedTuple):
    total: float
    lower_edges: np.ndarray
    upper_edges: np.ndarray
    lower_nodes: np.ndarray
    upper_nodes: np.ndarray


class PiecewiseGauss:
    """Composite Gauss-Legendre rule over consecutive pieces ``[edges[i], edges[i+1]]``.

    ``edges_upper`` (``1 - edges``, computed independently) is only used for rank
    pieces, where it fixes the piece lengths in the upper half accurately.
    """

    def __init__(self, edges, edges_upper=None, order: int = PIECE_ORDER):
        edges = np.asarray(edges, dtype=float)
        xi, w, running = _cumulative_matrix(order)
        if edges_upper is None:
            h = np.diff(edges)
            self.nodes_upper = None
        else:
            edges_upper = np.asarray(edges_upper, dtype=float)
            mid = 0.5 * (edges[:-1] + edges[1:])
            h = np.where(mid < 0.5, np.diff(edges), edges_upper[:-1] - edges_upper[1:])
            self.nodes_upper = edges_upper[:-1, None] - h[:, None] * xi
        if np.any(h <= 0):
            raise DomainError("piece edges must be strictly increasing")
        self.edges = edges
        self.edges_upper = edges_upper
        self.h = h
        self.nodes = edges[:-1, None] + h[:, None] * xi
        self.weights = h[:, None] * w
        self._running = running

    def integral(self, values) -> float:
        return float(np.sum(np.asarray(values) * self.weights))

    def cumulative(self, values) -> Cumulative:
        """Running integrals from the left and from the right, at edges and nodes."""
        values = np.asarray(values, dtype=float)
        piece = np.sum(values * self.weights, axis=1)
        lower_edges = np.concatenate([[0.0], np.cumsum(piece)])
        upper_edges = np.concatenate([np.cumsum(piece[::-1])[::-1], [0.0]])
        partial = self.h[:, None] * (values @ self._running.T)
        lower_nodes = lower_edges[:-1, None] + partial
        upper_nodes = upper_edges[1:, None] + (piece[:, None] - partial)
        return Cumulative(float(upper_edges[0]), lower_edges, upper_edges, lower_nodes, upper_nodes)


class RankQuadrature(PiecewiseGauss):
    """Composite rule on (0, 1) whose pieces end at the grid nodes and at breakpoints."""

    def __init__(self, grid: RankGrid, breakpoints: Sequence[float] = (), order: int = PIECE_ORDER):
        bps = np.array(sorted({float(b) for b in breakpoints if 0.0 < b < 1.0}))
        if bps.size:
            near = np.min(np.abs(bps[:, None] - grid.nodes[None, :]), axis=1) < 1e-15
            bps = bps[~near]
        edges = np.concatenate([[0.0], grid.nodes, [1.0], bps])
        edges_upper = np.concatenate([[1.0], grid.upper, [0.0], 1.0 - bps])
        is_node = np.concatenate([[False], np.ones(grid.n, bool), [False], np.zeros(bps.size, bool)])
        order_idx = np.argsort(edges, kind="stable")
        super().__init__(edges[order_idx], edges_upper[order_idx], order)
        self.grid = grid
        self.breakpoints = tuple(bps)
        self.node_edges = np.flatnonzero(is_node[order_idx])


@functools.lru_cache(maxsize=64)
def rank_quadrature(n: int = DEFAULT_RANK_NODES, breakpoints: tuple = ()) -> RankQuadrature:
    return RankQuadrature(rank_grid(n), breakpoints)


def integrate_rank(fn: Callable, breakpoints: Sequence[float] = (), n: int = DEFAULT_RANK_NODES) -> float:
    """``int_0^1 fn(r) dr`` on the warped composite rule, split at ``breakpoints``."""
    rq = rank_quadrature(n, tuple(sorted(breakpoints)))
    return rq.integral(fn(rq.nodes))


@dataclass(frozen=True, eq=False)
class DistributionGrid:
    """A law on the real line stored through its quantile function on a rank grid.

    Parameters
    ----------
    r_nodes, r_upper : ndarray
        Ranks ``r`` and their complements ``1 - r``.
    q_values : ndarray
        Quantiles ``q(r)``, strictly increasing.
    density_values : ndarray
        Density at the quantiles, ``f(q(r))``.
    mean : float
        Mean of the law.
    weights : ndarray
        Rank-integration weights belonging to ``r_nodes``.
    breakpoints : tuple of float
        Ranks at which the density jumps or has a kink.
    logpdf_fn : callable, optional
        Exact normalised log-density, when the law was built from one.
    gaussian : (mean, sd), optional
        Set when the law is exactly normal; c.d.f. and quantiles are then closed form.
    log_normaliser : float
        ``ln int exp(logpdf)`` of the unnormalised input to :meth:`from_log_density`.
    kinks : Kinks, optional
        Exact quantiles and one-sided densities at the breakpoints; the c.d.f. and
        quantile splines are built separately on each side of a kink.
    """

    r_nodes: np.ndarray
    r_upper: np.ndarray
    q_values: np.ndarray
    density_values: np.ndarray
    mean: float
    weights: np.ndarray
    breakpoints: tuple = ()
    logpdf_fn: Callable | None = None
    gaussian: tuple | None = None
    log_normaliser: float = float("nan")
    kinks: "Kinks | None" = None

    # construction -----------------------------------------------------------------

    @classmethod
    def normal(cls, mean: float, sd: float, grid: RankGrid | None = None) -> "DistributionGrid":
        grid = grid or rank_grid()
        z = normal_score(grid.nodes, grid.upper)
        logpdf = lambda x: -0.5 * ((np.asarray(x) - mean) / sd) ** 2 - LOG_SQRT_2PI - math.log(sd)
        return cls(
            r_nodes=grid.nodes,
            r_upper=grid.upper,
            q_values=mean + sd * z,
            density_values=np.exp(-0.5 * z * z - LOG_SQRT_2PI) / sd,
            mean=float(mean),
            weights=grid.weights,
            logpdf_fn=logpdf,
            gaussian=(float(mean), float(sd)),
        )

    @classmethod
    def prior(cls, params: ModelParams, grid: RankGrid | None = None) -> "DistributionGrid":
        """The zero-effort terminal law ``N(x0, sigma^2 T)``."""
        return cls.normal(params.x0, params.scale, grid)

    @classmethod
    def from_log_density(
        cls,
        logpdf: Callable,
        params: ModelParams,
        grid: RankGrid | None = None,
        x_breakpoints: Sequence[float] = (),
        pieces: int = 512,
    ) -> "DistributionGrid":
        """Quantile representation of the law with unnormalised log-density ``logpdf``.

        The support is located by scanning ``logpdf`` around ``x0``; the c.d.f. is
        accumulated on a composite Gauss rule split at ``x_breakpoints`` and inverted
        at the rank nodes by safeguarded Newton steps.
        """
        grid = grid or rank_grid()
        lo, hi = _support(logpdf, params)
        bps = np.array(sorted({float(b) for b in x_breakpoints if lo < b < hi}))
        edges = np.union1d(np.linspace(lo, hi, pieces + 1), bps)
        pg = PiecewiseGauss(edges)
        lf = np.asarray(logpdf(pg.nodes), dtype=float)
        shift = float(np.max(lf))
        cum = pg.cumulative(np.exp(lf - shift))
        total = cum.total
        log_norm = shift + math.log(total)
        norm_logpdf = lambda x: np.asarray(logpdf(x), dtype=float) - log_norm
        mean = pg.integral(pg.nodes * np.exp(lf - shift)) / total

        x_all = np.concatenate([edges[:-1, None], pg.nodes], axis=1).ravel()
        x_all = np.append(x_all, edges[-1])
        F_all = np.concatenate([cum.lower_edges[:-1, None], cum.lower_nodes], axis=1).ravel()
        F_all = np.append(F_all, cum.lower_edges[-1]) / total
        U_all = np.concatenate([cum.upper_edges[:-1, None], cum.upper_nodes], axis=1).ravel()
        U_all = np.append(U_all, 0.0) / total
        f_all = np.exp(norm_logpdf(x_all))
        cdf, sf = _split_hermite(x_all, F_all, U_all, f_all, bps, norm_logpdf)

        r, ru = grid.nodes, grid.upper
        lower = r < 0.5
        x = np.where(lower, np.interp(r, F_all, x_all), np.interp(-ru, -U_all, x_all))
        for _ in range(8):
            f = np.maximum(np.exp(norm_logpdf(x)), 1e-300)
            resid = np.where(lower, cdf(x) - r, ru - sf(x))
            x = np.clip(x - resid / f, lo, hi)
        q = x
        dens = np.exp(norm_logpdf(q))
        rank_bps = ()
        kinks = None
        if bps.size:
            kr, kru = cdf(bps), sf(bps)
            kinks = Kinks(
                kr,
                kru,
                bps,
                np.exp(norm_logpdf(np.nextafter(bps, -np.inf))),
                np.exp(norm_logpdf(np.nextafter(bps, np.inf))),
            )
            rank_bps = tuple(float(v) for v in kr)
        return cls(
            r_nodes=r,
            r_upper=ru,
            q_values=q,
            density_values=dens,
            mean=float(mean),
            weights=grid.weights,
            breakpoints=rank_bps,
            logpdf_fn=norm_logpdf,
            log_normaliser=log_norm,
            kinks=kinks,
        )

    # evaluation -------------------------------------------------------------------

    @cached_property
    def _segments(self):
        """Per-segment knot arrays ``(q, r, 1 - r, f)`` split at the kinks."""
        q, r, ru, f = self.q_values, self.r_nodes, self.r_upper, self.density_values
        k = self.kinks
        if k is None or len(k.r) == 0:
            return [(q, r, ru, f)]
        seg = np.searchsorted(k.r, r, side="right")
        nk = len(k.r)
        out = []
        for j in range(nk + 1):
            idx = np.flatnonzero(seg == j)
            lo = k.q[j - 1] if j > 0 else -np.inf
            hi = k.q[j] if j < nk else np.inf
            idx = idx[(q[idx] > lo) & (q[idx] < hi)]
            cols = [q[idx], r[idx], ru[idx], f[idx]]
            if j > 0:
                left = (k.q[j - 1], k.r[j - 1], k.r_upper[j - 1], k.f_right[j - 1])
                cols = [np.concatenate([[v], c]) for v, c in zip(left, cols)]
            if j < nk:
                right = (k.q[j], k.r[j], k.r_upper[j], k.f_left[j])
                cols = [np.concatenate([c, [v]]) for v, c in zip(right, cols)]
            out.append(tuple(cols))
        return out

    def _piecewise(self, which: str):
        splines = []
        for q, r, ru, f in self._segments:
            if len(q) < 2:
                splines.append(None)
            elif which == "cdf":
                splines.append(CubicHermiteSpline(q, r, f, extrapolate=True))
            elif which == "sf":
                splines.append(CubicHermiteSpline(q, ru, -f, extrapolate=True))
            else:
                splines.append(CubicHermiteSpline(r, q, 1.0 / f, extrapolate=True))
        return splines

    @cached_property
    def _cdf_spline(self):
        return self._piecewise("cdf")

    @cached_property
    def _sf_spline(self):
        return self._piecewise("sf")

    @cached_property
    def _quantile_spline(self):
        return self._piecewise("quantile")

    def _eval(self, splines, cuts, t):
        t = np.asarray(t, dtype=float)
        if len(splines) == 1:
            return splines[0](t)
        seg = np.searchsorted(cuts, t, side="right")
        out = np.empty(t.shape)
        for j, sp in enumerate(splines):
            mask = seg == j
            if np.any(mask):
                out[mask] = sp(t[mask])
        return out

    def _clip_x(self, x):
        return np.clip(np.asarray(x, dtype=float), self.q_values[0], self.q_values[-1])

    def cdf(self, x):
        """``F(x)``; outside the grid the rank is clamped to the extreme nodes."""
        if self.gaussian is not None:
            m, sd = self.gaussian
            return np.clip(ndtr((np.asarray(x, dtype=float) - m) / sd), self.r_nodes[0], self.r_nodes[-1])
        cuts = self.kinks.q if self.kinks is not None else ()
        return np.clip(self._eval(self._cdf_spline, cuts, self._clip_x(x)), self.r_nodes[0], self.r_nodes[-1])

    def sf(self, x):
        """``1 - F(x)`` evaluated from the upper tail."""
        if self.gaussian is not None:
            m, sd = self.gaussian
            return np.clip(ndtr(-(np.asarray(x, dtype=float) - m) / sd), self.r_upper[-1], self.r_upper[0])
        cuts = self.kinks.q if self.kinks is not None else ()
        return np.clip(self._eval(self._sf_spline, cuts, self._clip_x(x)), self.r_upper[-1], self.r_upper[0])

    def normal_score(self, x):
        """``N^{-1}(F(x))`` without the loss of precision near rank one."""
        if self.gaussian is not None:
            m, sd = self.gaussian
            return (np.asarray(x, dtype=float) - m) / sd
        return normal_score(self.cdf(x), self.sf(x))

    def quantile(self, r):
        """``q(r)``; ranks outside the node range are clamped."""
        r = np.asarray(r, dtype=float)
        if self.gaussian is not None:
            m, sd = self.gaussian
            return m + sd * ndtri(np.clip(r, self.r_nodes[0], self.r_nodes[-1]))
        cuts = self.kinks.r if self.kinks is not None else ()
        return self._eval(self._quantile_spline, cuts, np.clip(r, self.r_nodes[0], self.r_nodes[-1]))

    def log_zeta_nodes(self, params: ModelParams) -> np.ndarray:
        """``ln zeta(q(r))`` at the nodes, with ``zeta = f / f0`` the normalised density."""
        if np.any(self.density_values <= 0):
            raise DomainError("density vanishes on the support")
        return np.log(self.density_values) - log_f0(params, self.q_values)

    def rank_interpolant(self, values) -> Callable:
        """Interpolate node values in ``r`` without crossing a breakpoint.

        Within each segment between breakpoints a not-a-knot cubic spline is used
        (linear when the segment holds fewer than four nodes), held constant
        beyond the segment's outermost nodes.
        """
        values = np.asarray(values, dtype=float)
        r = self.r_nodes
        cuts = np.concatenate([[0.0], np.asarray(self.breakpoints, dtype=float), [1.0]])
        seg_of_node = np.searchsorted(cuts, r, side="right") - 1
        pieces = []
        for k in range(len(cuts) - 1):
            idx = np.flatnonzero(seg_of_node == k)
            if idx.size == 0:
                pieces.append(None)
            elif idx.size < 4:
                rr, vv = r[idx], values[idx]
                pieces.append(lambda t, rr=rr, vv=vv: np.interp(t, rr, vv))
            else:
                rr, vv = r[idx], values[idx]
                spline = CubicSpline(rr, vv)
                pieces.append(lambda t, rr=rr, vv=vv, s=spline: np.where(t <= rr[0], vv[0], np.where(t >= rr[-1], vv[-1], s(np.clip(t, rr[0], rr[-1])))))

        def interpolant(t):
            t = np.asarray(t, dtype=float)
            seg = np.clip(np.searchsorted(cuts, t, side="right") - 1, 0, len(cuts) - 2)
            out = np.empty_like(t)
            for k, fn in enumerate(pieces):
                mask = seg == k
                if not np.any(mask):
                    continue
                if fn is None:
                    nearest = np.argmin(np.abs(r[None, :] - t[mask][:, None]), axis=1)
                    out[mask] = values[nearest]
                else:
                    out[mask] = fn(t[mask])
            return out

        return interpolant

    def rank_integral(self, values) -> float:
        """``int_0^1 v(r) dr`` for node samples ``v``."""
        values = np.asarray(values, dtype=float)
        if not self.breakpoints:
            return float(np.sum(self.weights * values))
        rq = rank_quadrature(len(self.r_nodes), tuple(self.breakpoints))
        return rq.integral(self.rank_interpolant(values)(rq.nodes))

    def validate(self, tol: float = GRID_TOL) -> dict:
        """Check monotonicity, positivity, quantile/density consistency, mass and mean.

        Returns the measured defects; raises :class:`DomainError` when one exceeds
        its tolerance.
        """
        q, f, r, ru = self.q_values, self.density_values, self.r_nodes, self.r_upper
        if np.any(np.diff(q) <= 0):
            raise DomainError("quantiles are not strictly increasing")
        if np.any(f <= 0) or not np.all(np.isfinite(f)):
            raise DomainError("density is not strictly positive")
        bps = np.asarray(self.breakpoints, dtype=float)
        seg = np.searchsorted(bps, r, side="right")
        # spline derivative of q within each breakpoint segment, tails excluded
        consistency = 0.0
        for k in np.unique(seg):
            idx = np.flatnonzero(seg == k)
            if idx.size < 8:
                continue
            slope = CubicSpline(r[idx], q[idx])(r[idx], 1)
            inner = idx[2:-2][(r[idx[2:-2]] > 1e-5) & (ru[idx[2:-2]] > 1e-5)]
            if inner.size:
                defect = np.abs(slope[2:-2][np.isin(idx[2:-2], inner)] * f[inner] - 1.0)
                consistency = max(consistency, float(np.max(defect)))
        mass = r[0] + ru[-1]
        for k in np.unique(seg):
            idx = np.flatnonzero(seg == k)
            if idx.size > 2:
                mass += simpson(f[idx], x=q[idx])
            elif idx.size == 2:
                mass += 0.5 * (f[idx[0]] + f[idx[1]]) * (q[idx[1]] - q[idx[0]])
        for a, b in zip(np.flatnonzero(np.diff(seg)), np.flatnonzero(np.diff(seg)) + 1):
            mass += (ru[a] - ru[b]) if r[a] >= 0.5 else (r[b] - r[a])
        mean_gap = abs(self.rank_integral(q) - self.mean)
        report = {"consistency": consistency, "mass": abs(mass - 1.0), "mean": mean_gap}
        if consistency > tol:
            raise DomainError(f"quantile/density inconsistency {consistency:.3g}")
        if abs(mass - 1.0) > 1e-8:
            raise DomainError(f"reconstructed mass differs from one by {abs(mass - 1.0):.3g}")
        if mean_gap > tol:
            raise DomainError(f"mean inconsistent with quantiles by {mean_gap:.3g}")
        return report


def _split_hermite(x, F, U, f, bps, logpdf):
    """C.d.f. and survival splines built separately between density jumps.

    Each piece uses the one-sided density at a jump as its end slope, so a
    discontinuous density does not bend the c.d.f. on the neighbouring cell.
    """
    if bps.size == 0:
        return CubicHermiteSpline(x, F, f), CubicHermiteSpline(x, U, -f)
    cut = np.searchsorted(x, bps)
    bounds = [0, *cut.tolist(), len(x) - 1]
    splines = []
    for j, (a, b) in enumerate(zip(bounds[:-1], bounds[1:])):
        fs = f[a : b + 1].copy()
        if j > 0:
            fs[0] = np.exp(logpdf(np.nextafter(x[a], np.inf)))
        if j < len(bounds) - 2:
            fs[-1] = np.exp(logpdf(np.nextafter(x[b], -np.inf)))
        splines.append((CubicHermiteSpline(x[a : b + 1], F[a : b + 1], fs), CubicHermiteSpline(x[a : b + 1], U[a : b + 1], -fs)))

    def pick(k):
        def ev(t):
            t = np.asarray(t, dtype=float)
            seg = np.searchsorted(bps, t, side="right")
            out = np.empty(t.shape)
            for j, sp in enumerate(splines):
                mask = seg == j
                if np.any(mask):
                    out[mask] = sp[k](t[mask])
            return out

        return ev

    return pick(0), pick(1)


def _support(logpdf: Callable, params: ModelParams, drop: float = 80.0) -> tuple[float, float]:
    """Interval outside which ``exp(logpdf)`` is below ``exp(max - drop)``."""
    half = 60.0
    for _ in range(6):
        z = np.linspace(-half, half, int(8 * half) + 1)
        x = params.x0 + params.scale * z
        with np.errstate(all="ignore"):
            lf = np.asarray(logpdf(x), dtype=float)
        lf = np.where(np.isnan(lf), -np.inf, lf)
        top = np.max(lf)
        if not math.isfinite(top):
            raise DomainError("log-density is not finite anywhere on the scan")
        keep = np.flatnonzero(lf >= top - drop)
        if keep[0] > 0 and keep[-1] < len(z) - 1:
            return float(x[keep[0] - 1]), float(x[keep[-1] + 1])
        half *= 2.0
    raise DomainError("density mass escapes every scanned interval")


def relative_entropy_to_prior(mu: DistributionGrid, params: ModelParams) -> float:
    """``H(mu | N(x0, sigma^2 T)) = int_0^1 ln zeta(q(r)) dr``."""
    return mu.rank_integral(mu.log_zeta_nodes(params))


def tilted_stats(logpdf: Callable, params: ModelParams, x_breakpoints: Sequence[float] = (), pieces: int = 256):
    """``(ln int exp(logpdf), mean)`` of an unnormalised log-density on the real line."""
    lo, hi = _support(logpdf, params)
    bps = [b for b in x_breakpoints if lo < b < hi]
    pg = PiecewiseGauss(np.union1d(np.linspace(lo, hi, pieces + 1), bps))
    lf = np.asarray(logpdf(pg.nodes), dtype=float)
    shift = float(np.max(lf))
    w = np.exp(lf - shift)
    total = pg.integral(w)
    return shift + math.log(total), pg.integral(pg.nodes * w) / total
