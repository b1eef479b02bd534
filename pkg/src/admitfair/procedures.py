"""Threshold solvers for the admission procedures.

Admission convention: an applicant is admitted iff their log-score ``Q`` is at or
below the threshold of their (group, region) cell, so the admit probability of a
cell is the region CDF evaluated at its threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Callable, Mapping

import numpy as np

from .errors import DomainError, InfeasibleQuotaError
from .gamma import GammaParams, gamma_cdf, gamma_quantile, regularized_lower_gamma
from .population import URM, Cell, Population, admit_probabilities, check_capacity

DEFAULT = "default"
QUOTA = "quota"
PLUS_FACTOR = "plus-factor"
TOP_PERCENTAGE = "top-percentage"
PROCEDURES = (DEFAULT, QUOTA, PLUS_FACTOR, TOP_PERCENTAGE)

_REL_WIDTH = 1e-12
_RANGE_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class ProcedureOutcome:
    """Solved thresholds with the admit probability and expected count of every cell."""

    procedure: str
    g: float
    thresholds: Mapping[Cell, float]
    admit_prob: Mapping[Cell, float]
    admit_count: Mapping[Cell, float]
    derived: Mapping[str, float]

    @property
    def total_admits(self) -> float:
        return math.fsum(self.admit_count.values())

    def group_admits(self, group: str) -> float:
        return math.fsum(v for (a, _), v in self.admit_count.items() if a == group)

    def region_admits(self, region: str) -> float:
        return math.fsum(v for (_, r), v in self.admit_count.items() if r == region)


def _outcome(
    pop: Population, g: float, procedure: str, thresholds: dict[Cell, float], derived: dict[str, float]
) -> ProcedureOutcome:
    probs = admit_probabilities(pop, thresholds)
    counts = {c: pop.table.counts[c] * probs[c] for c in pop.cells}
    return ProcedureOutcome(
        procedure=procedure,
        g=g,
        thresholds=MappingProxyType({c: float(thresholds[c]) for c in pop.cells}),
        admit_prob=MappingProxyType(probs),
        admit_count=MappingProxyType(counts),
        derived=MappingProxyType(dict(derived)),
    )


def _bisect_increasing(fn: Callable[[float], float], target: float, start: float) -> float:
    """Root of the continuous non-decreasing ``fn(q) = target`` on [0, inf).

    The upper end starts at ``start`` and doubles until ``fn(hi) >= target``; the
    bracket is then halved until its width is below 1e-12 relative to ``hi``.
    """
    lo, hi = 0.0, start
    while fn(hi) < target:
        lo, hi = hi, hi * 2.0
        if math.isinf(hi):
            raise ArithmeticError("could not bracket the threshold")
    for _ in range(2000):
        if hi - lo <= _REL_WIDTH * hi:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if fn(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _stacked_params(dists: list[GammaParams]) -> tuple[np.ndarray, np.ndarray]:
    return (np.array([d.shape for d in dists]), np.array([d.scale for d in dists]))


def _closed_quantile(dist: GammaParams, prob: float) -> float:
    """Quantile extended to the closed interval: 0 -> 0 and 1 -> inf."""
    if prob <= 0.0:
        return 0.0
    if prob >= 1.0:
        return math.inf
    return gamma_quantile(dist, prob)


def _urm_split(pop: Population, urm_group: str) -> tuple[float, float]:
    if urm_group not in pop.groups:
        raise ValueError(f"group {urm_group!r} not present in population")
    n_urm = pop.table.group_total(urm_group)
    return n_urm, pop.total - n_urm


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------


def default_threshold(pop: Population, g: float) -> float:
    """q_o solving sum_r n^(r) F^(r)(q_o) = g."""
    g = check_capacity(pop, g)
    shapes, scales = _stacked_params([pop.dist(r) for r in pop.regions])
    weights = np.array([pop.table.region_total(r) for r in pop.regions])

    def admits(q: float) -> float:
        return float(weights @ regularized_lower_gamma(shapes, q / scales))

    return _bisect_increasing(admits, g, float(np.max(shapes * scales)))


def solve_default(pop: Population, g: float) -> ProcedureOutcome:
    """One threshold q_o shared by every cell."""
    q_o = default_threshold(pop, g)
    return _outcome(pop, g, DEFAULT, {c: q_o for c in pop.cells}, {"q_o": q_o})


def quota_eta_prime(pop: Population, eta: float, urm_group: str = URM) -> float:
    """Induced non-URM weighting eta' from eta' * (n_rest / n) g = g - eta * (n_urm / n) g."""
    n_urm, n_rest = _urm_split(pop, urm_group)
    if n_rest <= 0:
        raise DomainError("quota needs at least one non-URM applicant")
    return max((pop.total - eta * n_urm) / n_rest, 0.0)


def solve_quota(pop: Population, g: float, eta: float, urm_group: str = URM) -> ProcedureOutcome:
    """Reserve ``eta`` times the natural URM share of seats for the URM group.

    Every URM cell gets admit probability g*eta/n and every other cell g*eta'/n,
    realized through per-region quantile inversion. A probability of exactly 0 or 1
    maps to threshold 0 or +inf.
    """
    g = check_capacity(pop, g)
    n = pop.total
    n_urm, _ = _urm_split(pop, urm_group)
    if n_urm <= 0:
        raise DomainError("quota needs at least one URM applicant")
    upper = n / n_urm
    if not (1.0 <= eta <= upper * (1.0 + _RANGE_SLACK)):
        raise ValueError(f"eta_quota must lie in [1, n/n_urm] = [1, {upper}], got {eta}")

    eta_prime = quota_eta_prime(pop, eta, urm_group)
    p_urm = g * eta / n
    p_rest = g * eta_prime / n
    for label, prob in (("URM", p_urm), ("non-URM", p_rest)):
        if prob > 1.0 + _RANGE_SLACK:
            raise InfeasibleQuotaError(
                f"{label} quota needs admit probability {prob:.6g} > 1 (g={g}, eta={eta})"
            )
    p_urm, p_rest = min(p_urm, 1.0), min(p_rest, 1.0)

    thresholds = {}
    for region in pop.regions:
        dist = pop.dist(region)
        q_urm = _closed_quantile(dist, p_urm)
        q_rest = _closed_quantile(dist, p_rest)
        for group in pop.groups:
            thresholds[(group, region)] = q_urm if group == urm_group else q_rest

    derived = {
        "eta_quota": float(eta),
        "eta_quota_prime": eta_prime,
        "urm_quota": eta * n_urm / n * g,
        "urm_admit_prob": p_urm,
        "non_urm_admit_prob": p_rest,
    }
    return _outcome(pop, g, QUOTA, thresholds, derived)


def plus_factor_threshold(pop: Population, g: float, eta_dagger: float, urm_group: str = URM) -> float:
    """q_dagger: URM scores judged on the eta_dagger-rescaled distribution, others unchanged."""
    g = check_capacity(pop, g)
    if not 0.0 < eta_dagger <= 1.0:
        raise ValueError(f"eta_dagger must lie in (0, 1], got {eta_dagger}")
    _urm_split(pop, urm_group)
    dists = [pop.dist(r) for r in pop.regions]
    shapes, scales = _stacked_params(dists)
    shapes = np.concatenate([shapes, shapes])
    urm_w = [pop.table.count(urm_group, r) for r in pop.regions]
    rest_w = [pop.table.region_total(r) - w for r, w in zip(pop.regions, urm_w)]
    weights = np.array(urm_w + rest_w)
    # F_dagger(q) = F(q / eta_dagger): the URM half evaluates the original CDF at q / eta_dagger
    divisors = np.concatenate([scales * eta_dagger, scales])

    def admits(q: float) -> float:
        return float(weights @ regularized_lower_gamma(shapes, q / divisors))

    return _bisect_increasing(admits, g, float(np.max(shapes * divisors)))


def solve_plus_factor(pop: Population, g: float, eta_dagger: float, urm_group: str = URM) -> ProcedureOutcome:
    """Holistic review with a plus factor on the URM scale parameter.

    URM cells carry the effective original-scale threshold q_dagger / eta_dagger;
    all other cells carry q_dagger.
    """
    q_dagger = plus_factor_threshold(pop, g, eta_dagger, urm_group)
    q_o = default_threshold(pop, g)
    urm_threshold = q_dagger / eta_dagger
    thresholds = {
        (group, region): urm_threshold if group == urm_group else q_dagger
        for group, region in pop.cells
    }
    derived = {
        "eta_dagger": float(eta_dagger),
        "q_dagger": q_dagger,
        "q_dagger_over_eta": urm_threshold,
        "q_o": q_o,
    }
    return _outcome(pop, g, PLUS_FACTOR, thresholds, derived)


def plus_factor_counts_on_perceived_scale(
    pop: Population, q_dagger: float, eta_dagger: float, urm_group: str = URM
) -> dict[Cell, float]:
    """Expected admits per cell with URM cells evaluated on Gamma(k, eta_dagger * theta) at q_dagger.

    Counterpart of the effective-threshold form used by :func:`solve_plus_factor`.
    """
    out = {}
    for group, region in pop.cells:
        dist = pop.dist(region)
        if group == urm_group:
            dist = dist.rescaled(eta_dagger)
        out[(group, region)] = pop.table.count(group, region) * gamma_cdf(dist, q_dagger)
    return out


def solve_top_percentage(pop: Population, g: float) -> ProcedureOutcome:
    """Region-specific, group-blind thresholds with F^(r)(q^(r)) = g / n in every region."""
    g = check_capacity(pop, g)
    prob = g / pop.total
    per_region = {r: _closed_quantile(pop.dist(r), prob) for r in pop.regions}
    thresholds = {(group, region): per_region[region] for group, region in pop.cells}
    derived = {"admit_prob": prob}
    derived.update({f"q_region:{r}": q for r, q in per_region.items()})
    return _outcome(pop, g, TOP_PERCENTAGE, thresholds, derived)


def solve(pop: Population, g: float, procedure: str, eta: float | None = None) -> ProcedureOutcome:
    """Dispatch by procedure name; ``eta`` is required for quota and plus-factor only."""
    needs_eta = procedure in (QUOTA, PLUS_FACTOR)
    if needs_eta and eta is None:
        raise ValueError(f"procedure {procedure!r} requires eta")
    if not needs_eta and eta is not None:
        raise ValueError(f"procedure {procedure!r} does not take eta")
    if procedure == DEFAULT:
        return solve_default(pop, g)
    if procedure == QUOTA:
        return solve_quota(pop, g, eta)
    if procedure == PLUS_FACTOR:
        return solve_plus_factor(pop, g, eta)
    if procedure == TOP_PERCENTAGE:
        return solve_top_percentage(pop, g)
    raise ValueError(f"unknown procedure {procedure!r}; expected one of {PROCEDURES}")


def pdf_intersection(k: float, theta_poor: float, theta_rich: float) -> float:
    """Unique positive crossing of the Gamma(k, theta_poor) and Gamma(k, theta_rich) densities.

    q = k ln(theta_poor / theta_rich) / (1/theta_rich - 1/theta_poor)
    """
    if not (k > 0 and theta_poor > 0 and theta_rich > 0):
        raise DomainError("shape and scales must be positive")
    if theta_poor == theta_rich:
        raise DomainError("equal scales: the densities coincide and have no unique intersection")
    return k * math.log(theta_poor / theta_rich) / (1.0 / theta_rich - 1.0 / theta_poor)

