"""Gamma distribution primitives over log-converted relative scores.

A raw score ``S`` in ``[s_min, s_max]`` maps to ``Q = -log((S - s_min) / (s_max - s_min))``,
so ``Q = 0`` is the best attainable score and larger ``Q`` is less competitive.
Within a region ``Q ~ Gamma(shape, scale)``.

The regularized lower incomplete gamma function ``P(a, x)`` is evaluated with the
classical split: power series for ``x < a + 1`` and a modified-Lentz continued
fraction for the complement otherwise. Both kernels are vectorized over numpy
arrays and iterate until every element has converged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from .errors import DomainError

_SERIES_EPS = 1e-17
_CF_EPS = 1e-15
_TINY = 1e-300
_MAX_ITER = 100_000
_CHECK_EVERY = 8  # convergence test cadence; extra terms past convergence are harmless


@dataclass(frozen=True)
class GammaParams:
    """Shape/scale pair of a region's log-score distribution."""

    shape: float
    scale: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.shape) and self.shape > 0):
            raise DomainError(f"shape must be a positive finite number, got {self.shape!r}")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise DomainError(f"scale must be a positive finite number, got {self.scale!r}")

    def mean(self) -> float:
        return self.shape * self.scale

    def rescaled(self, factor: float) -> GammaParams:
        """Same shape, scale multiplied by ``factor``."""
        return GammaParams(self.shape, self.scale * factor)


@dataclass(frozen=True)
class ScoreScale:
    """Bounds of the raw score. ``s_min`` itself is unattainable under the log map."""

    s_min: float
    s_max: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.s_min) and math.isfinite(self.s_max)):
            raise DomainError("score bounds must be finite")
        if not self.s_min < self.s_max:
            raise DomainError(f"need s_min < s_max, got ({self.s_min}, {self.s_max})")

    @property
    def width(self) -> float:
        return self.s_max - self.s_min


# ---------------------------------------------------------------------------
# Regularized incomplete gamma
# ---------------------------------------------------------------------------


def _log_prefactor(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    return a * np.log(x) - x - gammaln(a)


def _lower_series(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    ap = a.copy()
    term = 1.0 / a
    total = term.copy()
    for i in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if i % _CHECK_EVERY == 0 and not (term > total * _SERIES_EPS).any():
            break
    else:  # pragma: no cover - needs astronomically large shape
        raise ArithmeticError("incomplete gamma series did not converge")
    return total * np.exp(_log_prefactor(a, x))


def _upper_continued_fraction(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    an = np.empty_like(a)
    scratch = np.empty_like(a)
    for i in range(1, _MAX_ITER):
        np.subtract(a, i, out=an)
        an *= i
        b += 2.0
        d *= an
        d += b
        np.abs(d, out=scratch)
        np.copyto(d, _TINY, where=scratch < _TINY)
        np.divide(an, c, out=c)
        c += b
        np.abs(c, out=scratch)
        np.copyto(c, _TINY, where=scratch < _TINY)
        np.divide(1.0, d, out=d)
        np.multiply(d, c, out=scratch)
        h *= scratch
        if i % _CHECK_EVERY == 0:
            scratch -= 1.0
            if not (np.abs(scratch) > _CF_EPS).any():
                break
    else:  # pragma: no cover
        raise ArithmeticError("incomplete gamma continued fraction did not converge")
    return h * np.exp(_log_prefactor(a, x))


def _scalar_lower_gamma(a: float, x: float) -> float:
    """Same series / continued-fraction split on Python floats (no array overhead)."""
    log_pre = a * math.log(x) - x - math.lgamma(a)
    if x < a + 1.0:
        ap, term = a, 1.0 / a
        total = term
        for _ in range(_MAX_ITER):
            ap += 1.0
            term *= x / ap
            total += term
            if term <= total * _SERIES_EPS:
                return min(max(total * math.exp(log_pre), 0.0), 1.0)
        raise ArithmeticError("incomplete gamma series did not converge")  # pragma: no cover
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) <= _CF_EPS:
            return min(max(1.0 - h * math.exp(log_pre), 0.0), 1.0)
    raise ArithmeticError("incomplete gamma continued fraction did not converge")  # pragma: no cover


def regularized_lower_gamma(a, x):
    """P(a, x) = gamma(a, x) / Gamma(a) for a > 0, x >= 0 (broadcasting).

    Returns a float for scalar input and an ndarray otherwise.
    """
    if isinstance(a, (float, int)) and isinstance(x, (float, int)):
        a, x = float(a), float(x)
        if not a > 0:
            raise DomainError("incomplete gamma needs a > 0")
        if not x >= 0:
            raise DomainError("incomplete gamma needs x >= 0")
        if x == 0.0:
            return 0.0
        if math.isinf(x):
            return 1.0
        return _scalar_lower_gamma(a, x)
    a_arr, x_arr = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    shape = a_arr.shape
    a_arr = a_arr.ravel().copy()
    x_arr = x_arr.ravel().copy()
    if np.any(~(a_arr > 0)):
        raise DomainError("incomplete gamma needs a > 0")
    if np.any(~(x_arr >= 0)):
        raise DomainError("incomplete gamma needs x >= 0")

    out = np.empty_like(x_arr)
    out[x_arr == 0] = 0.0
    out[np.isinf(x_arr)] = 1.0
    finite = (x_arr > 0) & np.isfinite(x_arr)
    use_series = finite & (x_arr < a_arr + 1.0)
    use_cf = finite & ~use_series
    if use_series.any():
        out[use_series] = _lower_series(a_arr[use_series], x_arr[use_series])
    if use_cf.any():
        out[use_cf] = 1.0 - _upper_continued_fraction(a_arr[use_cf], x_arr[use_cf])
    np.clip(out, 0.0, 1.0, out=out)
    return float(out[0]) if shape == () else out.reshape(shape)


# ---------------------------------------------------------------------------
# Distribution functions
# ---------------------------------------------------------------------------


def _as_log_score(q) -> np.ndarray:
    arr = np.asarray(q, dtype=float)
    if np.any(~(arr >= 0)):
        raise DomainError("log-scores must be non-negative")
    return arr


def gamma_pdf(p: GammaParams, q):
    """Density of Gamma(shape, scale) at ``q >= 0``."""
    arr = _as_log_score(q)
    k, theta = p.shape, p.scale
    with np.errstate(divide="ignore", invalid="ignore"):
        log_density = (k - 1.0) * np.log(arr) - arr / theta - math.lgamma(k) - k * math.log(theta)
        out = np.exp(log_density)
    at_zero = arr == 0
    if np.any(at_zero):
        # (k - 1) * log(0) is nan when k == 1
        origin = math.inf if k < 1 else (1.0 / theta if k == 1 else 0.0)
        out = np.where(at_zero, origin, out)
    return float(out) if np.ndim(out) == 0 else out


def gamma_cdf(p: GammaParams, q):
    """P(Q <= q) for Q ~ Gamma(shape, scale); ``q`` may be ``inf``."""
    if isinstance(q, (float, int)):
        if not q >= 0:
            raise DomainError("log-scores must be non-negative")
        return regularized_lower_gamma(p.shape, float(q) / p.scale)
    arr = _as_log_score(q)
    return regularized_lower_gamma(p.shape, arr / p.scale)


def _standard_quantile(k: float, prob: float) -> float:
    """Solve P(k, x) = prob for x by safeguarded Newton inside a doubling bracket."""
    lo, hi = 0.0, max(k, 1e-300)
    while regularized_lower_gamma(k, hi) < prob:
        lo, hi = hi, hi * 2.0

    # small-x asymptote P(k, x) ~ x^k / Gamma(k + 1) gives a good start in the left tail
    x = math.exp((math.log(prob) + math.lgamma(k + 1.0)) / k)
    if not lo < x < hi:
        x = 0.5 * (lo + hi)
    log_gamma_k = math.lgamma(k)

    for _ in range(400):
        resid = regularized_lower_gamma(k, x) - prob
        if resid == 0.0:
            return x
        if resid < 0:
            lo = x
        else:
            hi = x
        density = math.exp((k - 1.0) * math.log(x) - x - log_gamma_k)
        step = resid / density if density > 0 else math.inf
        candidate = x - step
        if not lo < candidate < hi:
            candidate = 0.5 * (lo + hi)
        if abs(candidate - x) <= 1e-15 * candidate or hi - lo <= 1e-15 * hi:
            return candidate
        x = candidate
    return x


def gamma_quantile(p: GammaParams, prob: float) -> float:
    """Inverse CDF for ``prob`` in the open interval (0, 1)."""
    if not 0.0 < prob < 1.0:
        raise DomainError(f"quantile probability must lie in (0, 1), got {prob!r}")
    return _standard_quantile(p.shape, float(prob)) * p.scale


# ---------------------------------------------------------------------------
# Raw-score conversion
# ---------------------------------------------------------------------------


def to_log_score(s, scale: ScoreScale):
    """Raw score in (s_min, s_max] to log-score ``-log((s - s_min) / width)``."""
    arr = np.asarray(s, dtype=float)
    if np.any(~(arr > scale.s_min)) or np.any(~(arr <= scale.s_max)):
        raise DomainError(
            f"raw score must lie in ({scale.s_min}, {scale.s_max}]; s_min maps to infinity"
        )
    q = -np.log((arr - scale.s_min) / scale.width) + 0.0
    return float(q) if q.ndim == 0 else q


def from_log_score(q, scale: ScoreScale):
    """Inverse of :func:`to_log_score`."""
    arr = _as_log_score(q)
    s = scale.s_min + scale.width * np.exp(-arr)
    return float(s) if s.ndim == 0 else s


# ---------------------------------------------------------------------------
# Dominance and the CDF ratio
# ---------------------------------------------------------------------------


def _check_grid(grid) -> np.ndarray:
    arr = np.asarray(grid, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("grid must be a non-empty 1-d sequence")
    if np.any(arr <= 0) or np.any(np.diff(arr) <= 0):
        raise ValueError("grid must be positive and strictly increasing")
    return arr


def cdf_dominates(rich: GammaParams, poor: GammaParams, grid, atol: float = 0.0) -> bool:
    """True iff F_rich(q) >= F_poor(q) - atol at every grid point."""
    arr = _check_grid(grid)
    return bool(np.all(gamma_cdf(rich, arr) >= gamma_cdf(poor, arr) - atol))


def default_dominance_grid(rich: GammaParams, poor: GammaParams, size: int = 4096) -> np.ndarray:
    q_max = 20.0 * max(rich.mean(), poor.mean())
    q_min = 1e-8 * 0.5 * (rich.scale + poor.scale)
    return np.geomspace(q_min, q_max, size)


def cdf_ratio_limit_at_zero(rich: GammaParams, poor: GammaParams) -> float:
    """lim_{q -> 0+} F_rich(q) / F_poor(q) from F(q) ~ (q/scale)^k / Gamma(k + 1)."""
    if rich.shape == poor.shape:
        return (poor.scale / rich.scale) ** rich.shape
    return math.inf if rich.shape < poor.shape else 0.0


def cdf_ratio_sup(
    rich: GammaParams,
    poor: GammaParams,
    q_max: float | None = None,
    grid_size: int = 4096,
) -> float:
    """Supremum over q > 0 of F_rich(q) / F_poor(q).

    Grid maximum on ``grid_size`` log-spaced points in (0, q_max], polished with a
    bounded scalar search around the best interior point, then combined with the
    analytic q -> 0 limit. May return ``inf``.
    """
    if q_max is None:
        q_max = 20.0 * max(rich.mean(), poor.mean())
    if not q_max > 0:
        raise DomainError("q_max must be positive")
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")

    limit = cdf_ratio_limit_at_zero(rich, poor)
    if math.isinf(limit):
        return math.inf

    q_min = min(1e-8 * 0.5 * (rich.scale + poor.scale), 0.5 * q_max)
    grid = np.geomspace(q_min, q_max, grid_size)
    f_rich = gamma_cdf(rich, grid)
    f_poor = gamma_cdf(poor, grid)
    valid = f_poor > 0
    if not valid.any():
        return limit
    ratio = np.where(valid, f_rich / np.where(valid, f_poor, 1.0), -np.inf)
    best = int(np.argmax(ratio))
    best_value = float(ratio[best])

    if 0 < best < grid_size - 1:

        def neg_ratio(q: float) -> float:
            fp = gamma_cdf(poor, q)
            return -gamma_cdf(rich, q) / fp if fp > 0 else 0.0

        res = minimize_scalar(
            neg_ratio,
            bounds=(grid[best - 1], grid[best + 1]),
            method="bounded",
            options={"xatol": 1e-14 * grid[best + 1]},
        )
        best_value = max(best_value, -float(res.fun))

    return max(best_value, limit)
