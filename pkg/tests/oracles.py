"""Reference computations used by the tests.

Each oracle takes a separate route from the library: closed forms, adaptive
scipy quadrature on the original (untransformed) integrals, a hand-written
golden-section search, or brute-force discretisation. None of them imports the
library's solvers.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.special import ndtr, ndtri

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(fn, lo, hi, tol=1e-12, iters=400):
    """Maximise a unimodal ``fn`` on ``[lo, hi]`` by golden-section search."""
    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = fn(x1), fn(x2)
    for _ in range(iters):
        if b - a < tol:
            break
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = fn(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = fn(x1)
    x = 0.5 * (a + b)
    return fn(x), x


def rank_value(R, kappa, points=None):
    """``-kappa ln int_0^1 exp(-R(r)/kappa) dr`` by adaptive quadrature."""
    val, _ = integrate.quad(lambda r: math.exp(-R(r) / kappa), 0.0, 1.0, points=points, epsabs=1e-14, epsrel=1e-13, limit=400)
    return -kappa * math.log(val)


def step_value(levels, edges, kappa):
    """Closed-form game value of a step reward."""
    levels = np.asarray(levels, float)
    w = np.diff(np.asarray(edges, float))
    lo = levels.min()
    return lo - kappa * math.log(float(np.sum(w * np.exp(-(levels - lo) / kappa))))


def rank_y(R, kappa, r, points=None):
    """Normalised ``y(r) = int_0^r e^{-R/kappa} / int_0^1 e^{-R/kappa}``."""
    g = lambda z: math.exp(-R(z) / kappa)
    tot, _ = integrate.quad(g, 0.0, 1.0, points=points, epsabs=1e-15, epsrel=1e-13, limit=400)
    part, _ = integrate.quad(g, 0.0, r, epsabs=1e-15, epsrel=1e-13, limit=400) if r > 0 else (0.0, 0.0)
    return part / tot


def rank_effort(R, kappa, scale, points=None):
    """``scale * int_0^1 N^{-1}(y(r)) dr`` by adaptive quadrature in r."""
    brk = sorted(set([0.5] + list(points or ())))
    val, _ = integrate.quad(lambda r: ndtri(rank_y(R, kappa, r, points)), 0.0, 1.0, points=brk, limit=400, epsabs=1e-12)
    return scale * val


def quantile_2r(x0, s, r, upper=None):
    """Equilibrium quantile for ``R(r) = kappa r``.

    ``upper`` holds ``1 - r`` to full precision; when given, the top half is
    evaluated through the complement ``1 - y``.
    """
    r = np.asarray(r, float)
    lower = x0 + s * ndtri(-np.expm1(-r) / -math.expm1(-1.0))
    if upper is None:
        return lower
    u = np.asarray(upper, float)
    tail = math.exp(-1.0) * np.expm1(u) / -math.expm1(-1.0)
    return np.where(r > 0.5, x0 - s * ndtri(tail), lower)


def tilt_mean(logw, x0, s, lo_hi=None):
    """Mean and normaliser of ``N(x0, s^2)`` tilted by ``exp(logw(y))``."""
    lo, hi = lo_hi or (x0 - 40 * s, x0 + 40 * s)
    dens = lambda y: math.exp(-0.5 * ((y - x0) / s) ** 2 + logw(y)) / (s * math.sqrt(2 * math.pi))
    z, _ = integrate.quad(dens, lo, hi, limit=800, epsabs=0, epsrel=1e-13, points=[x0])
    m, _ = integrate.quad(lambda y: y * dens(y), lo, hi, limit=800, epsabs=0, epsrel=1e-13, points=[x0])
    return m / z, z


def effort_truncated(M, lam, x0, s):
    """Mean displacement of ``f0 exp(clip(y, -M, M)/lam)``, integrated piecewise in closed form."""
    # pieces: y < -M (weight e^{-M/lam}), |y| <= M (tilt e^{y/lam}), y > M (weight e^{M/lam})
    def piece_gauss(a, b, mu):
        za, zb = (a - mu) / s, (b - mu) / s
        mass = ndtr(zb) - ndtr(za)
        phi = lambda z: math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi) if math.isfinite(z) else 0.0
        first = mu * mass + s * (phi(za) - phi(zb))
        return mass, first

    shift = s * s / lam
    c_mid = math.exp(x0 / lam + s * s / (2 * lam * lam))
    m1, f1 = piece_gauss(-math.inf, -M, x0)
    m2, f2 = piece_gauss(-M, M, x0 + shift)
    m3, f3 = piece_gauss(M, math.inf, x0)
    lw, uw = math.exp(-M / lam), math.exp(M / lam)
    Z = lw * m1 + c_mid * m2 + uw * m3
    mean = (lw * f1 + c_mid * f2 + uw * f3) / Z
    return mean - x0


def first_passage_pdf(x0, sigma, t):
    return x0 / (sigma * math.sqrt(2 * math.pi)) * t**-1.5 * math.exp(-(x0**2) / (2 * sigma**2 * t))


def hitting_brute_force(R, R_inf, x0, sigma, T, kappa, bins=200, beta_grid=2001):
    """Split problem on a bin grid: piecewise-constant densities and a search over the hit mass.

    Inside each bin the first-passage mass is computed by the reflection formula
    and ``R`` is replaced by its prior-weighted bin average. For a fixed hit mass
    ``beta`` the inner optimum is the Lagrange tilt, so the objective reduces to
    ``J(beta) = kappa beta ln(S / beta) + R_inf (1 - beta) - kappa (1 - beta) ln((1 - beta) / (1 - F(T)))``.
    """
    F = lambda t: 2.0 * ndtr(-x0 / (sigma * math.sqrt(t))) if t > 0 else 0.0
    edges = np.linspace(0.0, T, bins + 1)
    gx, gw = np.polynomial.legendre.leggauss(10)
    S = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        mass = F(b) - F(a)
        t = 0.5 * (a + b) + 0.5 * (b - a) * gx
        w = 0.5 * (b - a) * gw * np.array([first_passage_pdf(x0, sigma, ti) for ti in t])
        rbar = float(np.sum(w * R(t)) / np.sum(w)) if np.sum(w) > 0 else float(R(0.5 * (a + b)))
        S += mass * math.exp(rbar / kappa)
    miss = 1.0 - F(T)

    def J(beta):
        return kappa * beta * math.log(S / beta) + R_inf * (1 - beta) - kappa * (1 - beta) * math.log((1 - beta) / miss)

    bs = np.linspace(1e-9, 1 - 1e-9, beta_grid)
    vals = [J(b) for b in bs]
    k = int(np.argmax(vals))
    return golden_max(J, bs[max(k - 1, 0)], bs[min(k + 1, beta_grid - 1)], tol=1e-14)


def bernoulli_kl(a, x):
    return a * math.log(a / x) + (1 - a) * math.log((1 - a) / (1 - x))


def bisect(fn, lo, hi, iters=200):
    flo = fn(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def robin_hood(levels, rng, transfers):
    """Apply transfers from richer to poorer bins that keep the levels sorted.

    Each transfer moves mass from bin ``j`` to bin ``i < j`` without crossing,
    so the result is more equal (majorised by the input).
    """
    v = np.array(levels, float)
    n = v.size
    for _ in range(transfers):
        i, j = sorted(rng.choice(n, 2, replace=False))
        gap = v[j] - v[i]
        if gap <= 0:
            continue
        d = rng.uniform(0, 0.5) * gap
        # keep monotone: bounded by neighbours
        up = v[i + 1] - v[i] if i + 1 < j else gap / 2
        down = v[j] - v[j - 1] if j - 1 > i else gap / 2
        d = min(d, up, down)
        v[i] += d
        v[j] -= d
    return v
