"""Monte Carlo checks of the equilibrium: Euler simulation and Brownian-bridge sampling.

Every path draws from its own counter-based stream (Philox keyed by
``(seed, path_index)``) and paths are processed in fixed-size blocks, so results
are bit-identical whatever the number of worker threads.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .best_response import optimal_drift, reward_tilt
from .core import ModelParams, max_threads
from .equilibrium import EquilibriumResult
from .errors import DomainError
from .grid import DistributionGrid
from .reward import RewardSpec

BLOCK = 256
SCHEMES = ("euler", "bridge_mixture")
#: Ranks at which empirical quantiles are reported.
REPORT_RANKS = np.linspace(0.01, 0.99, 99)


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings.

    Attributes
    ----------
    n_paths, n_steps : int
        Must be at least one.
    seed : int
        Unsigned 64-bit seed.
    scheme : {"euler", "bridge_mixture"}
    record_paths : bool
        Keep whole trajectories in the report (needed for path dumps).
    """

    n_paths: int = 2000
    n_steps: int = 500
    seed: int = 0
    scheme: str = "euler"
    record_paths: bool = False

    def __post_init__(self):
        if int(self.n_paths) < 1:
            raise DomainError("n_paths must be >= 1")
        if int(self.n_steps) < 1:
            raise DomainError("n_steps must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be an unsigned 64-bit integer")
        if self.scheme not in SCHEMES:
            raise DomainError(f"scheme must be one of {SCHEMES}")


@dataclass(frozen=True)
class SimReport:
    """Summary of a Monte Carlo run.

    ``quantile_ranks`` and ``empirical_quantiles`` tabulate the empirical terminal
    law. ``effort_cost`` is the left-point sum ``sum c a*(t_k, X_k)^2 dt`` along
    each path; under the bridge scheme the feedback drift is evaluated along the
    sampled bridges.
    """

    quantile_ranks: np.ndarray
    empirical_quantiles: np.ndarray
    ks_stat: float
    ks_pvalue: float
    payoff_mean: float
    payoff_stderr: float
    effort_cost_mean: float
    effort_cost_stderr: float
    terminal_mean: float
    terminal_stderr: float
    terminal: np.ndarray = field(repr=False)
    times: np.ndarray | None = field(default=None, repr=False)
    paths: np.ndarray | None = field(default=None, repr=False)


def path_stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for path ``index``."""
    return np.random.Generator(np.random.Philox(key=np.array([seed, index], dtype=np.uint64)))


def _normals(cfg: SimConfig, start: int, stop: int, extra_uniform: bool):
    """Per-path draws for paths ``start..stop-1``: optional uniform, then ``n_steps`` normals."""
    u = np.empty(stop - start)
    z = np.empty((stop - start, cfg.n_steps))
    for k, i in enumerate(range(start, stop)):
        g = path_stream(int(cfg.seed), i)
        if extra_uniform:
            u[k] = g.random()
        z[k] = g.standard_normal(cfg.n_steps)
    return u, z


def _blocks(n: int):
    return [(a, min(a + BLOCK, n)) for a in range(0, n, BLOCK)]


def _run_blocks(work, n: int):
    blocks = _blocks(n)
    threads = max_threads()
    if threads <= 1:
        return [work(a, b) for a, b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ab: work(*ab), blocks))


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    n = values.size
    mean = math.fsum(values.tolist()) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum(((values - mean) ** 2).tolist()) / (n - 1)
    return mean, math.sqrt(var / n)


def _euler_block(field_, tilt, cfg: SimConfig, params: ModelParams, a: int, b: int):
    _, z = _normals(cfg, a, b, False)
    dt = params.T / cfg.n_steps
    sd = params.sigma * math.sqrt(dt)
    x = np.full(b - a, params.x0)
    cost = np.zeros(b - a)
    rec = np.empty((b - a, cfg.n_steps + 1)) if cfg.record_paths else None
    if rec is not None:
        rec[:, 0] = x
    for k in range(cfg.n_steps):
        t = k * dt
        drift = field_.drift(np.full_like(x, t), x)
        cost += params.c * drift * drift * dt
        x = x + drift * dt + sd * z[:, k]
        if rec is not None:
            rec[:, k + 1] = x
    payoff = tilt(x) * params.two_c_sigma2 - cost
    return x, payoff, cost, rec


def _bridge_block(mu: DistributionGrid, cfg: SimConfig, params: ModelParams, a: int, b: int, times: np.ndarray):
    u, z = _normals(cfg, a, b, True)
    y = mu.quantile(np.clip(u, mu.r_nodes[0], mu.r_nodes[-1]))
    dt = params.T / cfg.n_steps
    w = np.concatenate([np.zeros((b - a, 1)), np.cumsum(z * math.sqrt(dt), axis=1)], axis=1)
    frac = times / params.T
    paths = params.x0 + frac * (y[:, None] - params.x0) + params.sigma * (w - frac * w[:, -1:])
    paths[:, -1] = y
    return y, paths


def sample_bridge_mixture(mu_star: DistributionGrid, cfg: SimConfig, params: ModelParams):
    """Paths of the mixture of scaled Brownian bridges from ``(0, x0)`` to ``(T, Y)``, ``Y ~ mu_star``.

    Returns
    -------
    times : ndarray, shape (n_steps + 1,)
    paths : ndarray, shape (n_paths, n_steps + 1)
    """
    times = np.linspace(0.0, params.T, cfg.n_steps + 1)
    parts = _run_blocks(lambda a, b: _bridge_block(mu_star, cfg, params, a, b, times)[1], cfg.n_paths)
    return times, np.concatenate(parts, axis=0)


def simulate_equilibrium(R: RewardSpec, eq: EquilibriumResult, cfg: SimConfig, params: ModelParams) -> SimReport:
    """Simulate players best-responding to the equilibrium law ``eq.distribution``.

    The Euler scheme uses ``X_{k+1} = X_k + a*(t_k, X_k) dt + sigma sqrt(dt) xi_k``
    and reports the payoff ``R_mu(X_T) - sum c a*^2 dt``. The bridge scheme draws
    terminal values from the equilibrium law directly.
    """
    mu = eq.distribution
    tilt = reward_tilt(R, mu, params)
    times = np.linspace(0.0, params.T, cfg.n_steps + 1)
    if cfg.scheme == "euler":
        field_ = optimal_drift(R, mu, params, t_nodes=times)
        parts = _run_blocks(lambda a, b: _euler_block(field_, tilt, cfg, params, a, b), cfg.n_paths)
        terminal = np.concatenate([p[0] for p in parts])
        payoff = np.concatenate([p[1] for p in parts])
        cost = np.concatenate([p[2] for p in parts])
        paths = np.concatenate([p[3] for p in parts]) if cfg.record_paths else None
    else:
        field_ = optimal_drift(R, mu, params, t_nodes=times)
        dt = params.T / cfg.n_steps

        def work(a, b):
            y, block = _bridge_block(mu, cfg, params, a, b, times)
            drift = field_.drift(np.broadcast_to(times[:-1], block[:, :-1].shape), block[:, :-1])
            return y, params.c * np.sum(drift * drift, axis=1) * dt, block if cfg.record_paths else None

        parts = _run_blocks(work, cfg.n_paths)
        terminal = np.concatenate([p[0] for p in parts])
        cost = np.concatenate([p[1] for p in parts])
        paths = np.concatenate([p[2] for p in parts]) if cfg.record_paths else None
        payoff = tilt(terminal) * params.two_c_sigma2 - cost
    ks = stats.kstest(terminal, mu.cdf)
    pm, pse = _mean_se(payoff)
    cm, cse = _mean_se(cost)
    tm, tse = _mean_se(terminal)
    return SimReport(
        quantile_ranks=REPORT_RANKS.copy(),
        empirical_quantiles=np.quantile(terminal, REPORT_RANKS),
        ks_stat=float(ks.statistic),
        ks_pvalue=float(ks.pvalue),
        payoff_mean=pm,
        payoff_stderr=pse,
        effort_cost_mean=cm,
        effort_cost_stderr=cse,
        terminal_mean=tm,
        terminal_stderr=tse,
        terminal=terminal,
        times=times if cfg.record_paths else None,
        paths=paths,
    )


def write_paths_csv(path, times: np.ndarray, paths: np.ndarray) -> None:
    """Dump trajectories as rows ``(path_id, t, x)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path_id", "t", "x"])
        for i, row in enumerate(paths):
            for t, x in zip(times, row):
                w.writerow([i, repr(float(t)), repr(float(x))])
