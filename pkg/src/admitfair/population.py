"""Applicant population: group x region counts plus one score distribution per region.

There is deliberately no slot for a per-group distribution. Scores depend on the
region only, so any two groups in the same region share a CDF by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, NamedTuple

import numpy as np

from .errors import CapacityError, StructureError, ValidationError
from .gamma import GammaParams, ScoreScale, cdf_dominates, default_dominance_grid, gamma_cdf

URM = "URM"
NON_URM = "nonURM"
POOR = "poor"
RICH = "rich"

Cell = tuple[str, str]  # (group, region)


def _unique_in_order(labels) -> tuple[str, ...]:
    return tuple(dict.fromkeys(labels))


@dataclass(frozen=True, eq=False)
class DemographicTable:
    """Applicant counts n[group, region]. Counts are reals; unlisted cells are 0."""

    counts: Mapping[Cell, float]
    groups: tuple[str, ...] = field(init=False)
    regions: tuple[str, ...] = field(init=False)
    total: float = field(init=False)

    def __post_init__(self) -> None:
        if not self.counts:
            raise ValidationError("demographic table is empty")
        clean: dict[Cell, float] = {}
        for (group, region), n in self.counts.items():
            if not group or not region:
                raise ValidationError("group and region labels must be non-empty strings")
            n = float(n)
            if not (math.isfinite(n) and n >= 0):
                raise ValidationError(f"count for ({group}, {region}) must be finite and >= 0, got {n}")
            clean[(group, region)] = n
        groups = _unique_in_order(g for g, _ in clean)
        regions = _unique_in_order(r for _, r in clean)
        dense = {(g, r): clean.get((g, r), 0.0) for g in groups for r in regions}
        object.__setattr__(self, "counts", MappingProxyType(dense))
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "regions", regions)
        object.__setattr__(self, "total", math.fsum(dense.values()))

    @classmethod
    def from_nested(cls, nested: Mapping[str, Mapping[str, float]]) -> DemographicTable:
        """Build from ``{group: {region: n}}``."""
        return cls({(g, r): n for g, row in nested.items() for r, n in row.items()})

    def count(self, group: str, region: str) -> float:
        return self.counts[(group, region)]

    def group_total(self, group: str) -> float:
        return math.fsum(self.counts[(group, r)] for r in self.regions)

    def region_total(self, region: str) -> float:
        return math.fsum(self.counts[(g, region)] for g in self.groups)

    @property
    def cells(self) -> tuple[Cell, ...]:
        return tuple(self.counts)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, DemographicTable) and dict(self.counts) == dict(other.counts)


@dataclass(frozen=True, eq=False)
class Population:
    table: DemographicTable
    region_dists: Mapping[str, GammaParams]
    scale: ScoreScale

    def __post_init__(self) -> None:
        dists = dict(self.region_dists)
        if set(dists) != set(self.table.regions):
            raise StructureError(
                f"region distributions {sorted(dists)} do not match table regions "
                f"{sorted(self.table.regions)}"
            )
        for region, dist in dists.items():
            if not isinstance(dist, GammaParams):
                raise StructureError(f"distribution for region {region!r} must be GammaParams")
        ordered = {r: dists[r] for r in self.table.regions}
        object.__setattr__(self, "region_dists", MappingProxyType(ordered))

    @property
    def groups(self) -> tuple[str, ...]:
        return self.table.groups

    @property
    def regions(self) -> tuple[str, ...]:
        return self.table.regions

    @property
    def cells(self) -> tuple[Cell, ...]:
        return self.table.cells

    @property
    def total(self) -> float:
        return self.table.total

    def dist(self, region: str) -> GammaParams:
        return self.region_dists[region]

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Population)
            and self.table == other.table
            and dict(self.region_dists) == dict(other.region_dists)
            and self.scale == other.scale
        )


@dataclass(frozen=True)
class Capacity:
    """Number of seats g at the selective college."""

    g: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.g) and self.g > 0):
            raise CapacityError(f"capacity must be positive and finite, got {self.g!r}")


def check_capacity(pop: Population, g: float) -> float:
    g = float(g)
    if not (math.isfinite(g) and g > 0):
        raise CapacityError(f"capacity must be positive and finite, got {g!r}")
    if not g < pop.total:
        raise CapacityError(f"capacity g={g} must be strictly below the applicant total n={pop.total}")
    return g


class Violation(NamedTuple):
    code: str
    detail: str


def require_theorem_setting(pop: Population) -> None:
    if set(pop.groups) != {URM, NON_URM} or set(pop.regions) != {POOR, RICH}:
        raise StructureError(
            f"theorem setting needs groups {{{URM}, {NON_URM}}} and regions {{{POOR}, {RICH}}}; "
            f"got groups {list(pop.groups)} and regions {list(pop.regions)}"
        )


def validate_theorem_setting(pop: Population, g: float | None = None) -> list[Violation]:
    """Return the violated structural assumptions of the two-group, two-region setting.

    Checked: URM concentration in the poor region (strict), URM being the smaller
    group, CDF dominance of the rich region, and ``0 < g < n`` when ``g`` is given.
    """
    require_theorem_setting(pop)
    n = pop.table.count
    out: list[Violation] = []

    # n_a^poor / n_a'^poor > n_a^rich / n_a'^rich, cross-multiplied so zero counts are safe
    lhs = n(URM, POOR) * n(NON_URM, RICH)
    rhs = n(URM, RICH) * n(NON_URM, POOR)
    if not lhs > rhs:
        out.append(Violation(
            "historical_injustice",
            "URM share is not strictly higher in the poor region than in the rich region",
        ))
    if not pop.table.group_total(URM) < pop.table.group_total(NON_URM):
        out.append(Violation("urm_minority", "URM applicants are not fewer than non-URM applicants"))

    rich, poor = pop.dist(RICH), pop.dist(POOR)
    if not cdf_dominates(rich, poor, default_dominance_grid(rich, poor)):
        out.append(Violation("cdf_dominance", "rich-region CDF does not dominate the poor-region CDF"))

    if g is not None and not 0 < g < pop.total:
        out.append(Violation("capacity", f"capacity g={g} is not in (0, n={pop.total})"))
    return out


def admit_probabilities(pop: Population, thresholds: Mapping[Cell, float]) -> dict[Cell, float]:
    """F^(region)(threshold) for every cell; admission means Q <= threshold."""
    missing = [c for c in pop.cells if c not in thresholds]
    if missing:
        raise ValueError(f"thresholds missing for cells {missing}")
    out = {}
    for region in pop.regions:
        cells = [c for c in pop.cells if c[1] == region]
        probs = np.atleast_1d(gamma_cdf(pop.dist(region), [thresholds[c] for c in cells]))
        out.update(zip(cells, probs.tolist()))
    return {c: out[c] for c in pop.cells}


def expected_admits(pop: Population, thresholds: Mapping[Cell, float]) -> float:
    """Sum over cells of n[cell] * F^(region)(threshold[cell])."""
    probs = admit_probabilities(pop, thresholds)
    return math.fsum(pop.table.counts[c] * probs[c] for c in pop.cells)
