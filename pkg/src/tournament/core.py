"""Model primitives, Gaussian special functions and quadrature helpers."""

from __future__ import annotations

import functools
import math
import os
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate as _spi
from scipy.special import ndtr, ndtri, roots_hermitenorm, roots_legendre

from .errors import DomainError, QuadratureError

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

#: Default absolute tolerance for scalar quadrature.
QUAD_TOL = 1e-10
#: Default tolerance for scalar fixed points and root finders.
FIXED_POINT_TOL = 1e-10
#: Default tolerance for grid self-consistency checks.
GRID_TOL = 1e-6


@dataclass(frozen=True)
class ModelParams:
    """Primitives of the controlled diffusion ``dX = a dt + sigma dB`` and its cost.

    Parameters
    ----------
    x0 : float
        Initial project value.
    sigma : float
        Volatility, must be positive.
    T : float
        Horizon, must be positive.
    c : float
        Coefficient of the quadratic running cost ``c a^2``, must be positive.
    """

    x0: float = 0.0
    sigma: float = 1.0
    T: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        for name in ("x0", "sigma", "T", "c"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite")
            object.__setattr__(self, name, float(value))
        for name in ("sigma", "T", "c"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be > 0")

    @property
    def two_c_sigma2(self) -> float:
        """The entropy price ``2 c sigma^2``."""
        return 2.0 * self.c * self.sigma**2

    @property
    def scale(self) -> float:
        """Terminal standard deviation under zero effort, ``sigma sqrt(T)``."""
        return self.sigma * math.sqrt(self.T)


def gauss_cdf(z):
    """Standard normal c.d.f."""
    return ndtr(z)


def gauss_quantile(p):
    """Standard normal quantile, defined on the open unit interval."""
    p_arr = np.asarray(p, dtype=float)
    if np.any(~((p_arr > 0.0) & (p_arr < 1.0))):
        raise DomainError("gauss_quantile requires 0 < p < 1")
    out = ndtri(p_arr)
    return float(out) if out.ndim == 0 else out


def normal_score(p, p_upper=None):
    """``N^{-1}(p)`` computed from whichever tail is more accurate.

    ``p_upper`` is ``1 - p`` supplied independently; above the median the
    quantile is taken from it so that ranks close to one keep full precision.
    """
    p = np.asarray(p, dtype=float)
    if p_upper is None:
        return ndtri(p)
    p_upper = np.asarray(p_upper, dtype=float)
    lower = p < 0.5
    return np.where(lower, ndtri(np.where(lower, p, 0.5)), -ndtri(np.where(lower, 0.5, p_upper)))


def f0_density(params: ModelParams, x):
    """Density of the zero-effort terminal law ``N(x0, sigma^2 T)``."""
    return np.exp(log_f0(params, x))


def log_f0(params: ModelParams, x):
    z = (np.asarray(x, dtype=float) - params.x0) / params.scale
    return -0.5 * z * z - LOG_SQRT_2PI - math.log(params.scale)


class Quadrature(NamedTuple):
    value: float
    error: float


@dataclass(frozen=True)
class Gaussian:
    """Integration domain weighted by the normal density ``N(mean, sd^2)``."""

    mean: float = 0.0
    sd: float = 1.0


@functools.lru_cache(maxsize=16)
def legendre01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on ``[0, 1]``."""
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


@functools.lru_cache(maxsize=16)
def hermite_normal(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Hermite nodes and weights for expectations against ``N(0, 1)``."""
    z, w = roots_hermitenorm(n)
    return z, w / math.sqrt(2.0 * math.pi)


def integrate(fn: Callable, domain, *, points=None, tol: float = QUAD_TOL) -> Quadrature:
    """Integrate ``fn`` over an interval or against a Gaussian weight.

    Parameters
    ----------
    fn : callable
        Scalar integrand. For Gaussian domains it must accept arrays.
    domain : tuple or Gaussian
        ``(a, b)`` (infinite ends allowed) for adaptive quadrature, or a
        :class:`Gaussian` for Gauss-Hermite expectation ``E fn(mean + sd Z)``.
    points : sequence, optional
        Known breakpoints of the integrand inside a finite interval.
    tol : float
        Absolute tolerance; exceeding it raises :class:`QuadratureError`.
    """
    if isinstance(domain, Gaussian):
        z, w = hermite_normal(128)
        coarse = float(np.dot(w, fn(domain.mean + domain.sd * z)))
        z2, w2 = hermite_normal(256)
        fine = float(np.dot(w2, fn(domain.mean + domain.sd * z2)))
        err = abs(fine - coarse)
        if not math.isfinite(fine) or err > tol * max(1.0, abs(fine)):
            raise QuadratureError(f"Gauss-Hermite estimate unstable (difference {err:.3g})")
        return Quadrature(fine, err)

    a, b = domain
    kwargs = dict(epsabs=tol, epsrel=tol, limit=500, full_output=1)
    if points is not None and math.isfinite(a) and math.isfinite(b):
        kwargs["points"] = [p for p in points if a < p < b]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _spi.IntegrationWarning)
        out = _spi.quad(fn, a, b, **kwargs)
    value, err = out[0], out[1]
    flagged = len(out) > 3  # quad appends a message only when it hit a problem
    if not math.isfinite(value) or (flagged and err > tol * max(1.0, abs(value))):
        raise QuadratureError(f"quad did not converge on [{a}, {b}]: estimate {value}, error {err:.3g}")
    return Quadrature(float(value), float(err))


def max_threads() -> int:
    """Worker cap from ``TOURNAMENT_THREADS`` (default 1, i.e. serial)."""
    raw = os.environ.get("TOURNAMENT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
