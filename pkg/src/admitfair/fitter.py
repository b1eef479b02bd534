"""Recover region-level score distributions and compositions from aggregate statistics.

Decision variables, per region r: Gamma shape k_r, scale theta_r, admission
threshold q_r (shared by all groups), and for every group a the applicant count
n[a, r]. The observed statistics form four constraint families:

* ``applicants``: sum_r n[a, r] against each group's applicant count
* ``admits``: sum_r n[a, r] F_r(q_r) against each group's admit count
* ``applicant_quantiles``: sum_r F_r(q*) N_r against the applicants at or above each cut
* ``admit_quantiles``: sum_r F_r(min(q*, q_r)) N_r against the admits at or above each cut

where N_r = sum_a n[a, r] and q* is the log-score of a raw-score cut. Both quantile
families count applicants, so a fraction at a cut is relative to the applicant total.

The loss is the weighted sum of squared relative mismatches, each family's weight
divided by its number of terms. Optimization runs in an unconstrained space (log
for k, theta, q; a per-group softmax over regions scaled by the group's applicant
total for the counts), so positivity and row sums hold exactly. The search is a
multi-start adaptive Nelder-Mead; its inner loop evaluates the CDF with
``scipy.special.gammainc`` for speed, and the reported loss and residuals are
recomputed with the in-house kernel.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np
from scipy.special import gammainc

from .errors import DomainError, ValidationError
from .gamma import GammaParams, ScoreScale, gamma_quantile, regularized_lower_gamma, to_log_score

FAMILIES = ("applicants", "admits", "applicant_quantiles", "admit_quantiles")

# box on the transformed coordinates keeps the incomplete gamma well-behaved
_LOG_SHAPE_BOUNDS = (math.log(0.05), math.log(500.0))
_LOG_SCALE_BOUNDS = (math.log(1e-4), math.log(10.0))
_LOG_THRESHOLD_BOUNDS = (math.log(1e-6), math.log(50.0))
_LOGIT_BOUND = 30.0
_ZERO_FLOOR = 1e-6
# relative residuals near 1e-12: further descent only chases rounding noise
LOSS_FLOOR = 1e-24


@dataclass(frozen=True)
class QuantilePoint:
    """A raw-score cut with the applicants and admits at or above it, as fractions of all applicants."""

    raw_score: float
    applicant_frac: float
    admit_frac: float


@dataclass(frozen=True, eq=False)
class SummaryStats:
    applicants_by_group: Mapping[str, float]
    admits_by_group: Mapping[str, float]
    quantile_points: tuple[QuantilePoint, ...]
    scale: ScoreScale

    def __post_init__(self) -> None:
        applicants = {g: float(v) for g, v in self.applicants_by_group.items()}
        admits = {g: float(v) for g, v in self.admits_by_group.items()}
        if not applicants:
            raise ValidationError("summary statistics contain no groups")
        if set(applicants) != set(admits):
            raise ValidationError("applicant and admit tables name different groups")
        for g, n in applicants.items():
            a = admits[g]
            if not (math.isfinite(n) and n >= 0 and math.isfinite(a) and a >= 0):
                raise ValidationError(f"group {g!r}: counts must be finite and non-negative")
            if a > n:
                raise ValidationError(f"group {g!r}: admits {a} exceed applicants {n}")
        if sum(applicants.values()) <= 0:
            raise ValidationError("total applicant count must be positive")
        points = []
        for p in self.quantile_points:
            for name in ("applicant_frac", "admit_frac"):
                v = getattr(p, name)
                if not (math.isfinite(v) and 0.0 <= v <= 1.0):
                    raise ValidationError(f"cut {p.raw_score}: {name} {v} outside [0, 1]")
            if p.admit_frac > p.applicant_frac:
                raise ValidationError(
                    f"cut {p.raw_score}: admit fraction {p.admit_frac} exceeds applicant fraction "
                    f"{p.applicant_frac}"
                )
            if not self.scale.s_min < p.raw_score <= self.scale.s_max:
                raise DomainError(
                    f"cut {p.raw_score} outside ({self.scale.s_min}, {self.scale.s_max}]"
                )
            points.append(p)
        if len({p.raw_score for p in points}) != len(points):
            raise ValidationError("duplicate raw-score cuts")
        points.sort(key=lambda p: -p.raw_score)
        object.__setattr__(self, "applicants_by_group", MappingProxyType(applicants))
        object.__setattr__(self, "admits_by_group", MappingProxyType(admits))
        object.__setattr__(self, "quantile_points", tuple(points))

    def __reduce__(self):
        # mapping proxies do not pickle; rebuild from plain dicts (worker processes)
        return (
            type(self),
            (dict(self.applicants_by_group), dict(self.admits_by_group), self.quantile_points, self.scale),
        )

    @property
    def groups(self) -> tuple[str, ...]:
        return tuple(self.applicants_by_group)

    @property
    def total_applicants(self) -> float:
        return math.fsum(self.applicants_by_group.values())

    @property
    def total_admits(self) -> float:
        return math.fsum(self.admits_by_group.values())


def convert_quantile_points(stats: SummaryStats) -> list[float]:
    """Log-scores q* of the raw-score cuts.

    The fraction at or above a raw cut equals the CDF at q*, since the log map
    reverses the order of scores.
    """
    return [to_log_score(p.raw_score, stats.scale) for p in stats.quantile_points]


@dataclass(frozen=True, eq=False)
class FitParameters:
    """Candidate solution: one Gamma and one threshold per region plus group x region counts."""

    region_dists: Mapping[str, GammaParams]
    thresholds: Mapping[str, float]
    counts: Mapping[tuple[str, str], float]

    @property
    def regions(self) -> tuple[str, ...]:
        return tuple(self.region_dists)


@dataclass(frozen=True, eq=False)
class FitProblem:
    stats: SummaryStats
    num_regions: int = 3
    weights: Mapping[str, float] = field(default_factory=lambda: dict.fromkeys(FAMILIES, 1.0))
    restarts: int = 32
    rng_seed: int = 0
    max_evals: int = 20_000
    stall_iterations: int = 200
    stall_rtol: float = 1e-10

    def __post_init__(self) -> None:
        if self.num_regions < 1:
            raise ValueError("num_regions must be at least 1")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        w = dict.fromkeys(FAMILIES, 1.0)
        w.update(self.weights)
        unknown = set(w) - set(FAMILIES)
        if unknown:
            raise ValueError(f"unknown constraint families {sorted(unknown)}")
        if any(not (math.isfinite(v) and v >= 0) for v in w.values()):
            raise ValueError("weights must be finite and non-negative")
        object.__setattr__(self, "weights", MappingProxyType(w))

    def __reduce__(self):
        return (
            type(self),
            (self.stats, self.num_regions, dict(self.weights), self.restarts, self.rng_seed,
             self.max_evals, self.stall_iterations, self.stall_rtol),
        )


@dataclass(frozen=True, eq=False)
class FitSolution:
    parameters: FitParameters
    loss: float
    residuals: Mapping[str, float]
    converged: bool
    evaluations: int
    restart: int

    @property
    def region_dists(self) -> Mapping[str, GammaParams]:
        return self.parameters.region_dists

    @property
    def thresholds(self) -> Mapping[str, float]:
        return self.parameters.thresholds

    @property
    def counts(self) -> Mapping[tuple[str, str], float]:
        return self.parameters.counts

    def group_admit_rates(self) -> dict[str, float]:
        """sum_r n[a, r] F_r(q_r) / sum_r n[a, r] for every group."""
        p = self.parameters
        probs = {
            r: float(regularized_lower_gamma(d.shape, p.thresholds[r] / d.scale))
            for r, d in p.region_dists.items()
        }
        out = {}
        for g in dict.fromkeys(a for a, _ in p.counts):
            total = math.fsum(p.counts[(g, r)] for r in p.regions)
            admitted = math.fsum(p.counts[(g, r)] * probs[r] for r in p.regions)
            out[g] = admitted / total if total > 0 else math.nan
        return out


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------


class _Targets:
    """Observed statistics laid out as arrays, shared by every objective evaluation."""

    def __init__(self, stats: SummaryStats, weights: Mapping[str, float]):
        self.groups = stats.groups
        self.applicants = np.array([stats.applicants_by_group[g] for g in self.groups])
        self.admits = np.array([stats.admits_by_group[g] for g in self.groups])
        self.cuts = [p.raw_score for p in stats.quantile_points]
        self.q_star = np.array(convert_quantile_points(stats), dtype=float)
        total = stats.total_applicants
        self.applicant_q = np.array([p.applicant_frac for p in stats.quantile_points]) * total
        self.admit_q = np.array([p.admit_frac for p in stats.quantile_points]) * total
        floor = _ZERO_FLOOR * total
        self.denoms = {
            "applicants": np.maximum(self.applicants, floor),
            "admits": np.maximum(self.admits, floor),
            "applicant_quantiles": np.maximum(self.applicant_q, floor),
            "admit_quantiles": np.maximum(self.admit_q, floor),
        }
        self.family_weight = {
            f: (weights[f] / n if n else 0.0)
            for f, n in (
                ("applicants", self.applicants.size),
                ("admits", self.admits.size),
                ("applicant_quantiles", self.q_star.size),
                ("admit_quantiles", self.q_star.size),
            )
        }

    def labels(self, family: str) -> list[str]:
        if family in ("applicants", "admits"):
            return [f"{family}[{g}]" for g in self.groups]
        return [f"{family}[{c!r}]" for c in self.cuts]


def _model_statistics(
    targets: _Targets, shapes, scales, thresholds, counts, cdf=regularized_lower_gamma
) -> dict[str, np.ndarray]:
    """Forward model; ``counts`` has shape (groups, regions)."""
    j = targets.q_star.size
    q_star = targets.q_star
    points = np.empty((shapes.size, 1 + 2 * j))
    points[:, 0] = thresholds
    points[:, 1 : 1 + j] = q_star[None, :]
    points[:, 1 + j :] = np.minimum(q_star[None, :], thresholds[:, None])
    values = cdf(shapes[:, None], points / scales[:, None])
    region_totals = counts.sum(axis=0)
    return {
        "applicants": counts.sum(axis=1),
        "admits": counts @ values[:, 0],
        "applicant_quantiles": region_totals @ values[:, 1 : 1 + j],
        "admit_quantiles": region_totals @ values[:, 1 + j :],
    }


def _loss_and_relative(targets: _Targets, model: dict[str, np.ndarray]) -> tuple[float, dict[str, np.ndarray]]:
    observed = {
        "applicants": targets.applicants,
        "admits": targets.admits,
        "applicant_quantiles": targets.applicant_q,
        "admit_quantiles": targets.admit_q,
    }
    rel = {f: (model[f] - observed[f]) / targets.denoms[f] for f in FAMILIES}
    loss = math.fsum(targets.family_weight[f] * float(rel[f] @ rel[f]) for f in FAMILIES)
    return loss, rel


def objective(
    stats: SummaryStats, candidate: FitParameters, weights: Mapping[str, float] | None = None
) -> tuple[float, dict[str, float]]:
    """Loss and named relative residuals of ``candidate`` against ``stats``.

    Residual names look like ``admits[Asian]`` or ``admit_quantiles[3.7]``.
    """
    w = dict.fromkeys(FAMILIES, 1.0)
    if weights:
        w.update(weights)
    targets = _Targets(stats, w)
    regions = candidate.regions
    if set(candidate.thresholds) != set(regions):
        raise ValueError("thresholds must cover exactly the candidate's regions")
    for r in regions:
        if not candidate.thresholds[r] >= 0:
            raise DomainError(f"threshold for region {r!r} must be non-negative")
    missing = [(g, r) for g in targets.groups for r in regions if (g, r) not in candidate.counts]
    if missing:
        raise ValueError(f"candidate counts missing cells {missing}")
    shapes = np.array([candidate.region_dists[r].shape for r in regions])
    scales = np.array([candidate.region_dists[r].scale for r in regions])
    thresholds = np.array([candidate.thresholds[r] for r in regions], dtype=float)
    counts = np.array([[candidate.counts[(g, r)] for r in regions] for g in targets.groups], dtype=float)
    if np.any(counts < 0):
        raise DomainError("counts must be non-negative")
    model = _model_statistics(targets, shapes, scales, thresholds, counts)
    loss, rel = _loss_and_relative(targets, model)
    residuals = {}
    for f in FAMILIES:
        residuals.update(zip(targets.labels(f), rel[f].tolist()))
    return loss, residuals


def forward_statistics(
    params: FitParameters, scale: ScoreScale, cuts: list[float]
) -> SummaryStats:
    """Summary statistics implied exactly by ``params`` at the given raw-score cuts."""
    regions = params.regions
    groups = tuple(dict.fromkeys(g for g, _ in params.counts))
    probs = {r: float(regularized_lower_gamma(params.region_dists[r].shape,
                                               params.thresholds[r] / params.region_dists[r].scale))
             for r in regions}
    applicants = {g: math.fsum(params.counts[(g, r)] for r in regions) for g in groups}
    admits = {g: math.fsum(params.counts[(g, r)] * probs[r] for r in regions) for g in groups}
    total = math.fsum(applicants.values())
    region_totals = {r: math.fsum(params.counts[(g, r)] for g in groups) for r in regions}
    points = []
    for cut in cuts:
        q_star = to_log_score(cut, scale)
        app = adm = 0.0
        for r in regions:
            d = params.region_dists[r]
            app += region_totals[r] * float(regularized_lower_gamma(d.shape, q_star / d.scale))
            q_adm = min(q_star, params.thresholds[r])
            adm += region_totals[r] * float(regularized_lower_gamma(d.shape, q_adm / d.scale))
        points.append(QuantilePoint(float(cut), app / total, min(adm, app) / total))
    return SummaryStats(applicants, admits, tuple(points), scale)


# ---------------------------------------------------------------------------
# Parameter transform
# ---------------------------------------------------------------------------


class _Encoding:
    """Unconstrained vector <-> (shapes, scales, thresholds, counts)."""

    def __init__(self, num_groups: int, num_regions: int, applicants: np.ndarray):
        self.g = num_groups
        self.r = num_regions
        self.applicants = applicants
        self.dim = 3 * num_regions + num_groups * (num_regions - 1)
        lo = [_LOG_SHAPE_BOUNDS[0]] * num_regions + [_LOG_SCALE_BOUNDS[0]] * num_regions
        lo += [_LOG_THRESHOLD_BOUNDS[0]] * num_regions + [-_LOGIT_BOUND] * (self.dim - 3 * num_regions)
        hi = [_LOG_SHAPE_BOUNDS[1]] * num_regions + [_LOG_SCALE_BOUNDS[1]] * num_regions
        hi += [_LOG_THRESHOLD_BOUNDS[1]] * num_regions + [_LOGIT_BOUND] * (self.dim - 3 * num_regions)
        self.lo = np.array(lo)
        self.hi = np.array(hi)

    def decode(self, z: np.ndarray):
        z = np.clip(z, self.lo, self.hi)
        r = self.r
        shapes = np.exp(z[:r])
        scales = np.exp(z[r : 2 * r])
        thresholds = np.exp(z[2 * r : 3 * r])
        logits = np.zeros((self.g, r))
        if r > 1:
            logits[:, 1:] = z[3 * r :].reshape(self.g, r - 1)
        logits -= logits.max(axis=1, keepdims=True)
        weights = np.exp(logits)
        weights /= weights.sum(axis=1, keepdims=True)
        counts = weights * self.applicants[:, None]
        return shapes, scales, thresholds, counts

    def random_start(self, rng: np.random.Generator, admit_rate: float) -> np.ndarray:
        r = self.r
        shapes = np.exp(rng.uniform(math.log(1.0), math.log(30.0), r))
        means = np.exp(rng.uniform(math.log(0.03), math.log(1.0), r))
        scales = means / shapes
        rate = min(max(admit_rate, 0.01), 0.99)
        thresholds = np.array(
            [gamma_quantile(GammaParams(k, t), rate) for k, t in zip(shapes, scales)]
        ) * np.exp(rng.normal(0.0, 0.25, r))
        logits = rng.normal(0.0, 1.0, self.g * (r - 1))
        z = np.concatenate([np.log(shapes), np.log(scales), np.log(thresholds), logits])
        return np.clip(z, self.lo, self.hi)


# ---------------------------------------------------------------------------
# Nelder-Mead
# ---------------------------------------------------------------------------


@dataclass
class _SearchResult:
    x: np.ndarray
    fun: float
    evaluations: int
    converged: bool


def _nelder_mead(fun, x0: np.ndarray, step: float, max_evals: int, stall_iterations: int,
                 stall_rtol: float) -> _SearchResult:
    """Adaptive Nelder-Mead (dimension-dependent coefficients).

    Stops when the best value improved by less than ``stall_rtol`` (relative)
    over the last ``stall_iterations`` iterations, once it reaches ``LOSS_FLOOR``,
    or at ``max_evals``. After a
    stall the simplex is rebuilt around the incumbent; the search ends once a
    rebuilt simplex stalls without improving on the previous stall point.
    """
    n = x0.size
    alpha, beta, gamma, delta = 1.0, 1.0 + 2.0 / n, 0.75 - 0.5 / n, 1.0 - 1.0 / n
    evals = 0

    def f(x):
        nonlocal evals
        evals += 1
        v = fun(x)
        return v if math.isfinite(v) else math.inf

    def build(center):
        pts = np.vstack([center] + [center + step * e for e in np.eye(n)])
        return pts, np.array([f(p) for p in pts])

    simplex, values = build(x0)
    previous_stall = math.inf
    converged = False
    while True:
        history = []
        stalled = False
        while evals < max_evals:
            order = np.argsort(values, kind="stable")
            simplex, values = simplex[order], values[order]
            best = values[0]
            history.append(best)
            if best <= LOSS_FLOOR:
                stalled = True
                break
            if len(history) > stall_iterations:
                old = history[-1 - stall_iterations]
                if old - best <= stall_rtol * abs(old):
                    stalled = True
                    break
            centroid = simplex[:-1].mean(axis=0)
            worst = simplex[-1]
            xr = centroid + alpha * (centroid - worst)
            fr = f(xr)
            if fr < values[0]:
                xe = centroid + beta * (xr - centroid)
                fe = f(xe)
                if fe < fr:
                    simplex[-1], values[-1] = xe, fe
                else:
                    simplex[-1], values[-1] = xr, fr
            elif fr < values[-2]:
                simplex[-1], values[-1] = xr, fr
            else:
                if fr < values[-1]:
                    xc = centroid + gamma * (xr - centroid)
                    fc = f(xc)
                    accept = fc <= fr
                else:
                    xc = centroid - gamma * (centroid - worst)
                    fc = f(xc)
                    accept = fc < values[-1]
                if accept:
                    simplex[-1], values[-1] = xc, fc
                else:
                    simplex[1:] = simplex[0] + delta * (simplex[1:] - simplex[0])
                    values[1:] = [f(p) for p in simplex[1:]]
        i = int(np.argmin(values))
        x_best, f_best = simplex[i].copy(), float(values[i])
        if not stalled:
            break
        if f_best <= LOSS_FLOOR or previous_stall - f_best <= stall_rtol * abs(previous_stall):
            converged = True
            break
        previous_stall = f_best
        if evals + n + 1 >= max_evals:
            break
        simplex, values = build(x_best)
    return _SearchResult(x_best, f_best, evals, converged)


# ---------------------------------------------------------------------------
# Fit driver
# ---------------------------------------------------------------------------


def _run_restart(problem: FitProblem, index: int, seed_seq: np.random.SeedSequence) -> tuple[float, int, np.ndarray, int, bool]:
    stats = problem.stats
    targets = _Targets(stats, problem.weights)
    enc = _Encoding(len(targets.groups), problem.num_regions, targets.applicants)
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    admit_rate = stats.total_admits / stats.total_applicants

    def fun(z):
        shapes, scales, thresholds, counts = enc.decode(z)
        # the search loop uses the compiled kernel; the reported residuals use the in-house one
        model = _model_statistics(targets, shapes, scales, thresholds, counts, cdf=gammainc)
        return _loss_and_relative(targets, model)[0]

    start = enc.random_start(rng, admit_rate)
    res = _nelder_mead(fun, start, 0.3, problem.max_evals, problem.stall_iterations, problem.stall_rtol)
    return res.fun, index, np.clip(res.x, enc.lo, enc.hi), res.evaluations, res.converged


def _restart_task(args):
    return _run_restart(*args)


def fit(problem: FitProblem, threads: int = 1) -> FitSolution:
    """Best-of-restarts fit. Deterministic given ``problem`` regardless of ``threads``.

    Region labels of the result are "0".."R-1" in ascending order of the mean k * theta.
    """
    stats = problem.stats
    seeds = np.random.SeedSequence(problem.rng_seed).spawn(problem.restarts)
    tasks = [(problem, i, seeds[i]) for i in range(problem.restarts)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_restart_task, tasks))
    else:
        results = [_run_restart(*t) for t in tasks]
    loss, index, z, evaluations, converged = min(results, key=lambda t: (t[0], t[1]))

    targets = _Targets(stats, problem.weights)
    enc = _Encoding(len(targets.groups), problem.num_regions, targets.applicants)
    shapes, scales, thresholds, counts = enc.decode(z)
    order = np.argsort(shapes * scales, kind="stable")
    labels = [str(i) for i in range(problem.num_regions)]
    params = FitParameters(
        region_dists=MappingProxyType(
            {labels[i]: GammaParams(float(shapes[j]), float(scales[j])) for i, j in enumerate(order)}
        ),
        thresholds=MappingProxyType({labels[i]: float(thresholds[j]) for i, j in enumerate(order)}),
        counts=MappingProxyType(
            {(g, labels[i]): float(counts[gi, j]) for gi, g in enumerate(targets.groups)
             for i, j in enumerate(order)}
        ),
    )
    final_loss, residuals = objective(stats, params, problem.weights)
    return FitSolution(
        parameters=params,
        loss=final_loss,
        residuals=MappingProxyType(residuals),
        converged=converged,
        evaluations=evaluations,
        restart=index,
    )
