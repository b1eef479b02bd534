"""Numerical checks of the three fairness results on concrete instances.

Each check returns a :class:`TheoremReport` whose preconditions are evaluated
separately from the conclusion, so an instance outside a theorem's hypotheses is
reported (``status == "not-covered"``) rather than rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from .errors import UnsupportedSettingError
from .gamma import cdf_ratio_sup, gamma_cdf
from .population import (
    NON_URM,
    POOR,
    RICH,
    URM,
    Population,
    require_theorem_setting,
    validate_theorem_setting,
)
from .procedures import (
    default_threshold,
    pdf_intersection,
    plus_factor_threshold,
    solve_quota,
    solve_top_percentage,
)

STRICT_MARGIN = 1e-10
CONSERVATION_RTOL = 1e-8
RATIO_RTOL = 1e-10

HOLDS = "holds"
VIOLATED = "violated"
INDETERMINATE = "indeterminate"
NOT_COVERED = "not-covered"

_SETTING_CODES = ("historical_injustice", "urm_minority", "cdf_dominance", "capacity")


@dataclass(frozen=True, eq=False)
class TheoremReport:
    theorem_id: str
    preconditions_met: Mapping[str, bool]
    conclusion_holds: bool
    witness: Mapping[str, float]
    status: str
    notes: tuple[str, ...] = field(default=())

    @property
    def covered(self) -> bool:
        return all(self.preconditions_met.values())

    @property
    def passed(self) -> bool:
        """Preconditions met and the conclusion established (an indeterminate case does not pass)."""
        return self.status == HOLDS


def _setting_preconditions(pop: Population, g: float) -> dict[str, bool]:
    violated = {v.code for v in validate_theorem_setting(pop, g)}
    return {code: code not in violated for code in _SETTING_CODES}


def _report(theorem_id, pre, conclusion, witness, status=None, notes=()) -> TheoremReport:
    if status is None:
        if not all(pre.values()):
            status = NOT_COVERED
        else:
            status = HOLDS if conclusion else VIOLATED
    return TheoremReport(
        theorem_id=theorem_id,
        preconditions_met=MappingProxyType(dict(pre)),
        conclusion_holds=bool(conclusion),
        witness=MappingProxyType({k: float(v) for k, v in witness.items()}),
        status=status,
        notes=tuple(notes),
    )


def check_theorem1(pop: Population, g: float, eta: float) -> TheoremReport:
    """Quota-based admission and the poor-region non-URM threshold.

    The proven direction: if sup F_rich / F_poor < eta / eta' then the non-URM
    poor-region threshold is strictly more competitive (smaller) than the URM
    rich-region threshold. When the sup is not below eta / eta' the instance is
    reported as indeterminate.
    """
    require_theorem_setting(pop)
    pre = _setting_preconditions(pop, g)
    n = pop.total
    n_urm = pop.table.group_total(URM)
    n_rest = pop.table.group_total(NON_URM)
    pre["eta_in_range"] = 1.0 <= eta <= n / n_urm

    outcome = solve_quota(pop, g, eta)
    eta_prime = outcome.derived["eta_quota_prime"]
    rhs = eta / eta_prime if eta_prime > 0 else math.inf
    denom = n_urm * (1.0 - eta) + n_rest
    rhs_closed = n_rest * eta / denom if denom > 0 else math.inf
    lhs = cdf_ratio_sup(pop.dist(RICH), pop.dist(POOR))

    antecedent = rhs - lhs > STRICT_MARGIN
    q_rest_poor = outcome.thresholds[(NON_URM, POOR)]
    q_urm_rich = outcome.thresholds[(URM, RICH)]
    ordering = q_rest_poor < q_urm_rich
    conclusion = ordering or not antecedent

    witness = {
        "eta_quota": eta,
        "eta_quota_prime": eta_prime,
        "sup_cdf_ratio": lhs,
        "rhs": rhs,
        "rhs_closed_form": rhs_closed,
        "q_urm_poor": outcome.thresholds[(URM, POOR)],
        "q_urm_rich": q_urm_rich,
        "q_nonurm_poor": q_rest_poor,
        "q_nonurm_rich": outcome.thresholds[(NON_URM, RICH)],
        "ordering_holds": float(ordering),
    }
    status = None
    notes = []
    if all(pre.values()) and not antecedent:
        status = INDETERMINATE
        notes.append("sup ratio is not strictly below eta/eta'; ordering is not forced")
    return _report("T1", pre, conclusion, witness, status, notes)


def check_theorem2(pop: Population, g: float, eta_dagger: float) -> TheoremReport:
    """Plus factors and the unequal gain of rich- versus poor-region URM applicants.

    Requires equal shapes. Preconditions: q_o below the density crossing and
    eta_dagger in [q_o / q_tilde, 1). Conclusion: the rich-region gain
    F_rich(q_dagger/eta) - F_rich(q_o) exceeds the poor-region gain by more than
    the strictness margin.
    """
    require_theorem_setting(pop)
    rich, poor = pop.dist(RICH), pop.dist(POOR)
    if rich.shape != poor.shape:
        raise UnsupportedSettingError(
            f"plus-factor check needs equal shapes, got poor={poor.shape} rich={rich.shape}"
        )
    if rich.scale == poor.scale:
        raise UnsupportedSettingError("plus-factor check needs distinct region scales")
    if not 0.0 < eta_dagger <= 1.0:
        raise ValueError(f"eta_dagger must lie in (0, 1], got {eta_dagger}")

    k = rich.shape
    pre = _setting_preconditions(pop, g)
    q_o = default_threshold(pop, g)
    q_tilde = pdf_intersection(k, poor.scale, rich.scale)
    eta_lb = q_o * (1.0 / rich.scale - 1.0 / poor.scale) / (k * math.log(poor.scale / rich.scale))
    pre["q_o_below_intersection"] = q_tilde - q_o > STRICT_MARGIN
    pre["eta_in_interval"] = eta_lb <= eta_dagger < 1.0

    q_dagger = plus_factor_threshold(pop, g, eta_dagger)
    q_urm = q_dagger / eta_dagger
    gain_rich = gamma_cdf(rich, q_urm) - gamma_cdf(rich, q_o)
    gain_poor = gamma_cdf(poor, q_urm) - gamma_cdf(poor, q_o)
    margin = gain_rich - gain_poor

    witness = {
        "q_o": q_o,
        "q_tilde": q_tilde,
        "eta_dagger": eta_dagger,
        "eta_lower_bound": eta_lb,
        "q_dagger": q_dagger,
        "q_dagger_over_eta": q_urm,
        "gain_rich": gain_rich,
        "gain_poor": gain_poor,
        "margin": margin,
    }
    notes = ["eta_dagger interval taken as [lower bound, 1)"]
    if eta_dagger == 1.0:
        notes.append("eta_dagger = 1 is the identity plus factor; both gains are 0")
    return _report("T2", pre, margin > STRICT_MARGIN, witness, notes=notes)


def check_theorem3(pop: Population, g: float) -> TheoremReport:
    """Top-percentage plans: poor-region gain equals rich-region loss in expected admits.

    With equal shapes the region thresholds additionally satisfy
    q_poor / q_rich = theta_poor / theta_rich.
    """
    require_theorem_setting(pop)
    pre = _setting_preconditions(pop, g)
    rich, poor = pop.dist(RICH), pop.dist(POOR)
    q_o = default_threshold(pop, g)
    top = solve_top_percentage(pop, g)
    q_poor = top.derived[f"q_region:{POOR}"]
    q_rich = top.derived[f"q_region:{RICH}"]

    poor_gain = pop.table.region_total(POOR) * (gamma_cdf(poor, q_poor) - gamma_cdf(poor, q_o))
    rich_loss = pop.table.region_total(RICH) * (gamma_cdf(rich, q_o) - gamma_cdf(rich, q_rich))
    residual = poor_gain - rich_loss
    tolerance = CONSERVATION_RTOL * pop.total
    conclusion = abs(residual) <= tolerance

    witness = {
        "q_o": q_o,
        "q_poor": q_poor,
        "q_rich": q_rich,
        "poor_gain": poor_gain,
        "rich_loss": rich_loss,
        "conservation_residual": residual,
        "conservation_tolerance": tolerance,
    }
    notes = []
    if rich.shape == poor.shape:
        ratio = q_poor / q_rich
        expected = poor.scale / rich.scale
        rel_err = abs(ratio - expected) / expected
        witness.update(threshold_ratio=ratio, scale_ratio=expected, ratio_rel_error=rel_err)
        conclusion = conclusion and rel_err <= RATIO_RTOL
    else:
        notes.append("shapes differ; threshold-ratio identity not applicable")
    return _report("T3", pre, conclusion, witness, notes=notes)


def check_theorem(pop: Population, g: float, theorem: int, eta: float | None = None) -> TheoremReport:
    if theorem == 1:
        if eta is None:
            raise ValueError("theorem 1 requires eta")
        return check_theorem1(pop, g, eta)
    if theorem == 2:
        if eta is None:
            raise ValueError("theorem 2 requires eta")
        return check_theorem2(pop, g, eta)
    if theorem == 3:
        if eta is not None:
            raise ValueError("theorem 3 does not take eta")
        return check_theorem3(pop, g)
    raise ValueError(f"unknown theorem {theorem!r}; expected 1, 2 or 3")
