"""File formats: population documents, summary-statistics CSVs, result documents, report bundles.

JSON documents are written with sorted keys and shortest round-trip float
formatting, so identical inputs give byte-identical files and every float parses
back to the same bits. Non-finite floats (a quota threshold can be +inf) are
written as the strings ``"inf"``, ``"-inf"`` and ``"nan"``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import AdmitFairError, ParseError, ValidationError
from .fitter import FitParameters, FitProblem, FitSolution, QuantilePoint, SummaryStats
from .gamma import GammaParams, ScoreScale, from_log_score, gamma_cdf, gamma_pdf, gamma_quantile
from .montecarlo import SimulationResult
from .population import DemographicTable, Population
from .procedures import ProcedureOutcome
from .theorems import TheoremReport

POPULATION_FORMAT = "admitfair.population"
RESULT_FORMAT = "admitfair.result"
REPORT_FORMAT = "admitfair.report"
VERSION = 1

DENSITY_POINTS = 512
DENSITY_Q_MIN = 1e-4
DENSITY_UPPER_PROB = 0.999

GROUPS_COLUMNS = ("group", "applicants", "admits")
QUANTILE_COLUMNS = ("gpa_cut", "applicant_frac_at_or_above", "admit_frac_at_or_above")

_NONFINITE = {"inf": math.inf, "-inf": -math.inf, "nan": math.nan}


# ---------------------------------------------------------------------------
# JSON plumbing
# ---------------------------------------------------------------------------


def encode_number(x: float) -> float | str:
    x = float(x)
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


def decode_number(value: Any, where: str) -> float:
    if isinstance(value, bool):
        raise ParseError(f"{where}: expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str) and value in _NONFINITE:
        return _NONFINITE[value]
    raise ParseError(f"{where}: expected a number, got {value!r}")


def dumps(doc: Mapping[str, Any]) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(doc: Mapping[str, Any], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(doc))


def read_json(path: str | Path) -> Any:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _reject_constant(name: str):
    raise ParseError(f"bare {name} is not valid JSON; use the string form")


def _field(obj: Any, key: str, where: str) -> Any:
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object")
    if key not in obj:
        raise ParseError(f"{where}: missing field {key!r}")
    return obj[key]


def _label(value: Any, where: str) -> str:
    if not isinstance(value, str) or not value:
        raise ParseError(f"{where}: expected a non-empty string, got {value!r}")
    return value


def _check_header(doc: Any, fmt: str, where: str) -> None:
    if _field(doc, "format", where) != fmt:
        raise ParseError(f"{where}: format must be {fmt!r}, got {doc['format']!r}")
    if _field(doc, "version", where) != VERSION:
        raise ParseError(f"{where}: unsupported version {doc['version']!r}")


# ---------------------------------------------------------------------------
# Population documents
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PopulationFile:
    population: Population
    capacity: float | None


def population_to_dict(pop: Population, capacity: float | None = None) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "format": POPULATION_FORMAT,
        "version": VERSION,
        "scale": {"s_min": encode_number(pop.scale.s_min), "s_max": encode_number(pop.scale.s_max)},
        "regions": [
            {"id": r, "shape": encode_number(d.shape), "scale_param": encode_number(d.scale)}
            for r, d in pop.region_dists.items()
        ],
        "counts": [
            {"group": g, "region": r, "n": encode_number(n)} for (g, r), n in pop.table.counts.items()
        ],
    }
    if capacity is not None:
        doc["capacity"] = {"g": encode_number(capacity)}
    return doc


def population_from_dict(doc: Any, where: str = "population") -> PopulationFile:
    _check_header(doc, POPULATION_FORMAT, where)
    scale_doc = _field(doc, "scale", where)
    s_min = decode_number(_field(scale_doc, "s_min", f"{where}.scale"), f"{where}.scale.s_min")
    s_max = decode_number(_field(scale_doc, "s_max", f"{where}.scale"), f"{where}.scale.s_max")
    try:
        scale = ScoreScale(s_min, s_max)
    except AdmitFairError as exc:
        raise ValidationError(f"{where}.scale: {exc}") from None

    regions_doc = _field(doc, "regions", where)
    if not isinstance(regions_doc, list) or not regions_doc:
        raise ParseError(f"{where}.regions: expected a non-empty list")
    dists: dict[str, GammaParams] = {}
    for i, item in enumerate(regions_doc):
        loc = f"{where}.regions[{i}]"
        rid = _label(_field(item, "id", loc), f"{loc}.id")
        if rid in dists:
            raise ParseError(f"{loc}.id: duplicate region id {rid!r}")
        shape = decode_number(_field(item, "shape", loc), f"{loc}.shape")
        theta = decode_number(_field(item, "scale_param", loc), f"{loc}.scale_param")
        try:
            dists[rid] = GammaParams(shape, theta)
        except AdmitFairError as exc:
            raise ValidationError(f"{loc}: {exc}") from None

    counts_doc = _field(doc, "counts", where)
    if not isinstance(counts_doc, list) or not counts_doc:
        raise ParseError(f"{where}.counts: expected a non-empty list")
    counts: dict[tuple[str, str], float] = {}
    for i, item in enumerate(counts_doc):
        loc = f"{where}.counts[{i}]"
        group = _label(_field(item, "group", loc), f"{loc}.group")
        region = _label(_field(item, "region", loc), f"{loc}.region")
        n = decode_number(_field(item, "n", loc), f"{loc}.n")
        if (group, region) in counts:
            raise ParseError(f"{loc}: duplicate cell ({group}, {region})")
        if region not in dists:
            raise ValidationError(f"{loc}.region: {region!r} is not a declared region")
        if not (math.isfinite(n) and n >= 0):
            raise ValidationError(f"{loc}.n: count must be finite and non-negative, got {n}")
        counts[(group, region)] = n
    # declared regions without any listed cell still get zero counts
    groups = list(dict.fromkeys(g for g, _ in counts))
    full = {(g, r): counts.get((g, r), 0.0) for g in groups for r in dists}
    population = Population(DemographicTable(full), dists, scale)

    capacity = None
    if "capacity" in doc:
        capacity = decode_number(_field(doc["capacity"], "g", f"{where}.capacity"), f"{where}.capacity.g")
        if not (math.isfinite(capacity) and 0 < capacity < population.total):
            raise ValidationError(
                f"{where}.capacity.g: need 0 < g < n = {population.total}, got {capacity}"
            )
    return PopulationFile(population, capacity)


def load_population_file(path: str | Path) -> PopulationFile:
    return population_from_dict(read_json(path), where=str(path))


def parse_population(path: str | Path) -> Population:
    return load_population_file(path).population


def write_population(path: str | Path, pop: Population, capacity: float | None = None) -> None:
    write_json(population_to_dict(pop, capacity), path)


# ---------------------------------------------------------------------------
# Summary statistics CSVs
# ---------------------------------------------------------------------------


def _read_csv(path: str | Path, columns: tuple[str, ...]) -> list[dict[str, str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = tuple(h.strip() for h in (reader.fieldnames or ()))
        if header != columns:
            raise ParseError(f"{path}: expected columns {list(columns)}, got {list(header)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if None in row or any(v is None for v in row.values()):
                raise ParseError(f"{path} line {lineno}: expected {len(columns)} fields")
            rows.append({k.strip(): v.strip() for k, v in row.items()} | {"__line__": str(lineno)})
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return rows


def _csv_number(row: dict[str, str], key: str, path) -> float:
    text = row[key]
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"{path} line {row['__line__']}, field {key!r}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise ParseError(f"{path} line {row['__line__']}, field {key!r}: must be finite")
    return value


def parse_summary_stats(
    groups_path: str | Path, quantiles_path: str | Path, scale: ScoreScale = ScoreScale(0.0, 4.0)
) -> SummaryStats:
    """Read the per-group table and the raw-score cut table into validated statistics."""
    applicants: dict[str, float] = {}
    admits: dict[str, float] = {}
    for row in _read_csv(groups_path, GROUPS_COLUMNS):
        group = row["group"]
        if not group:
            raise ParseError(f"{groups_path} line {row['__line__']}: empty group label")
        if group in applicants:
            raise ParseError(f"{groups_path} line {row['__line__']}: duplicate group {group!r}")
        applicants[group] = _csv_number(row, "applicants", groups_path)
        admits[group] = _csv_number(row, "admits", groups_path)
    points = []
    for row in _read_csv(quantiles_path, QUANTILE_COLUMNS):
        points.append(
            QuantilePoint(
                _csv_number(row, "gpa_cut", quantiles_path),
                _csv_number(row, "applicant_frac_at_or_above", quantiles_path),
                _csv_number(row, "admit_frac_at_or_above", quantiles_path),
            )
        )
    return SummaryStats(applicants, admits, tuple(points), scale)


def write_summary_stats(stats: SummaryStats, groups_path: str | Path, quantiles_path: str | Path) -> None:
    with open(groups_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GROUPS_COLUMNS)
        for g in stats.groups:
            w.writerow([g, repr(stats.applicants_by_group[g]), repr(stats.admits_by_group[g])])
    with open(quantiles_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(QUANTILE_COLUMNS)
        for p in stats.quantile_points:
            w.writerow([repr(p.raw_score), repr(p.applicant_frac), repr(p.admit_frac)])


# ---------------------------------------------------------------------------
# Result serializers
# ---------------------------------------------------------------------------


def outcome_to_dict(outcome: ProcedureOutcome) -> dict[str, Any]:
    return {
        "procedure": outcome.procedure,
        "g": encode_number(outcome.g),
        "total_admits": encode_number(outcome.total_admits),
        "derived": {k: encode_number(v) for k, v in outcome.derived.items()},
        "cells": [
            {
                "group": g,
                "region": r,
                "threshold": encode_number(outcome.thresholds[(g, r)]),
                "admit_prob": encode_number(outcome.admit_prob[(g, r)]),
                "admit_count": encode_number(outcome.admit_count[(g, r)]),
            }
            for (g, r) in outcome.thresholds
        ],
    }


def theorem_report_to_dict(report: TheoremReport) -> dict[str, Any]:
    return {
        "theorem_id": report.theorem_id,
        "status": report.status,
        "preconditions_met": dict(report.preconditions_met),
        "conclusion_holds": report.conclusion_holds,
        "witness": {k: encode_number(v) for k, v in report.witness.items()},
        "notes": list(report.notes),
    }


def simulation_to_dict(sim: SimulationResult) -> dict[str, Any]:
    return {
        "procedure": sim.procedure,
        "seed": sim.seed,
        "replication": sim.replication,
        "total_admitted": sim.total_admitted,
        "expected_admitted": encode_number(sim.expected_admitted),
        "aggregate_sigma": encode_number(sim.aggregate_sigma),
        "aggregate_within": sim.aggregate_within,
        "all_within": sim.all_within,
        "cells": [
            {
                "group": g,
                "region": r,
                "samples": c.samples,
                "analytic": encode_number(c.analytic),
                "empirical": encode_number(c.empirical),
                "sigma": encode_number(c.sigma),
                "within": c.within,
            }
            for (g, r), c in sim.cells.items()
        ],
    }


def fit_solution_to_dict(sol: FitSolution, stats: SummaryStats, problem: FitProblem | None = None) -> dict[str, Any]:
    doc = {
        "scale": {"s_min": encode_number(stats.scale.s_min), "s_max": encode_number(stats.scale.s_max)},
        "regions": [
            {
                "id": r,
                "shape": encode_number(d.shape),
                "scale_param": encode_number(d.scale),
                "threshold": encode_number(sol.thresholds[r]),
            }
            for r, d in sol.region_dists.items()
        ],
        "counts": [{"group": g, "region": r, "n": encode_number(n)} for (g, r), n in sol.counts.items()],
        "loss": encode_number(sol.loss),
        "residuals": {k: encode_number(v) for k, v in sol.residuals.items()},
        "max_abs_residual": encode_number(max((abs(v) for v in sol.residuals.values()), default=0.0)),
        "group_admit_rates": {k: encode_number(v) for k, v in sol.group_admit_rates().items()},
        "converged": sol.converged,
        "evaluations": sol.evaluations,
        "restart": sol.restart,
    }
    if problem is not None:
        doc["problem"] = {
            "num_regions": problem.num_regions,
            "restarts": problem.restarts,
            "rng_seed": problem.rng_seed,
            "weights": {k: encode_number(v) for k, v in problem.weights.items()},
        }
    return doc


def fit_parameters_from_dict(doc: Any, where: str = "solution") -> tuple[FitParameters, ScoreScale]:
    scale_doc = _field(doc, "scale", where)
    scale = ScoreScale(
        decode_number(_field(scale_doc, "s_min", f"{where}.scale"), f"{where}.scale.s_min"),
        decode_number(_field(scale_doc, "s_max", f"{where}.scale"), f"{where}.scale.s_max"),
    )
    dists, thresholds = {}, {}
    for i, item in enumerate(_field(doc, "regions", where)):
        loc = f"{where}.regions[{i}]"
        rid = _label(_field(item, "id", loc), f"{loc}.id")
        if rid in dists:
            raise ParseError(f"{loc}.id: duplicate region id {rid!r}")
        dists[rid] = GammaParams(
            decode_number(_field(item, "shape", loc), f"{loc}.shape"),
            decode_number(_field(item, "scale_param", loc), f"{loc}.scale_param"),
        )
        thresholds[rid] = decode_number(_field(item, "threshold", loc), f"{loc}.threshold")
    counts = {}
    for i, item in enumerate(_field(doc, "counts", where)):
        loc = f"{where}.counts[{i}]"
        key = (_label(_field(item, "group", loc), f"{loc}.group"), _label(_field(item, "region", loc), f"{loc}.region"))
        counts[key] = decode_number(_field(item, "n", loc), f"{loc}.n")
    return FitParameters(dists, thresholds, counts), scale


def result_document(kind: str, body: Mapping[str, Any]) -> dict[str, Any]:
    return {"format": RESULT_FORMAT, "version": VERSION, "kind": kind, **body}


# ---------------------------------------------------------------------------
# Report bundles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CellRow:
    group: str
    region: str
    applicants: float
    threshold: float
    admit_prob: float
    admit_count: float


@dataclass(frozen=True)
class DensityGrid:
    q: tuple[float, ...]
    raw_score: tuple[float, ...]
    regions: tuple[tuple[str, tuple[float, ...]], ...]
    overall: tuple[float, ...]
    integrals: tuple[tuple[str, float], ...]


@dataclass(frozen=True)
class ReportBundle:
    source: str
    scale: ScoreScale
    cells: tuple[CellRow, ...]
    density: DensityGrid
    theorem: Mapping[str, Any] | None = None
    simulation: Mapping[str, Any] | None = None
    fit_residuals: Mapping[str, float] | None = None
    fit_loss: float | None = None


def _trapezoid(y: np.ndarray, x: np.ndarray) -> float:
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def density_grid(
    dists: Mapping[str, GammaParams], weights: Mapping[str, float], scale: ScoreScale, size: int = DENSITY_POINTS
) -> DensityGrid:
    """Region densities and their count-weighted mixture on a log-spaced q grid.

    The grid spans [1e-4, q_99.9] where q_99.9 is the largest 99.9% quantile among regions.
    """
    upper = max(gamma_quantile(d, DENSITY_UPPER_PROB) for d in dists.values())
    upper = max(upper, DENSITY_Q_MIN * 10.0)
    q = np.geomspace(DENSITY_Q_MIN, upper, size)
    total = math.fsum(weights.values())
    per_region = {r: np.asarray(gamma_pdf(d, q), dtype=float) for r, d in dists.items()}
    overall = np.zeros_like(q)
    if total > 0:
        for r, dens in per_region.items():
            overall += (weights[r] / total) * dens
    integrals = [(r, _trapezoid(dens, q)) for r, dens in per_region.items()]
    integrals.append(("overall", _trapezoid(overall, q)))
    raw = np.asarray(from_log_score(q, scale), dtype=float)
    return DensityGrid(
        q=tuple(q.tolist()),
        raw_score=tuple(raw.tolist()),
        regions=tuple((r, tuple(d.tolist())) for r, d in per_region.items()),
        overall=tuple(overall.tolist()),
        integrals=tuple(integrals),
    )


def _cells_from_outcome(pop: Population, cells_doc: list, where: str) -> tuple[CellRow, ...]:
    rows = []
    for i, item in enumerate(cells_doc):
        loc = f"{where}[{i}]"
        g = _label(_field(item, "group", loc), f"{loc}.group")
        r = _label(_field(item, "region", loc), f"{loc}.region")
        rows.append(
            CellRow(
                g,
                r,
                pop.table.count(g, r),
                decode_number(_field(item, "threshold", loc), f"{loc}.threshold"),
                decode_number(_field(item, "admit_prob", loc), f"{loc}.admit_prob"),
                decode_number(_field(item, "admit_count", loc), f"{loc}.admit_count"),
            )
        )
    return tuple(rows)


def build_report(result: Any, where: str = "result") -> ReportBundle:
    """Assemble a report bundle from a parsed result document of any kind."""
    _check_header(result, RESULT_FORMAT, where)
    kind = _field(result, "kind", where)
    if kind == "fit":
        params, scale = fit_parameters_from_dict(_field(result, "solution", where), f"{where}.solution")
        sol_doc = result["solution"]
        cells = []
        for (g, r), n in params.counts.items():
            q = params.thresholds[r]
            p = gamma_cdf(params.region_dists[r], q)
            cells.append(CellRow(g, r, n, q, p, n * p))
        weights = {r: math.fsum(n for (_, rr), n in params.counts.items() if rr == r) for r in params.regions}
        return ReportBundle(
            source=kind,
            scale=scale,
            cells=tuple(cells),
            density=density_grid(params.region_dists, weights, scale),
            fit_residuals={k: decode_number(v, f"{where}.residuals.{k}") for k, v in sol_doc["residuals"].items()},
            fit_loss=decode_number(sol_doc["loss"], f"{where}.loss"),
        )
    if kind not in ("solve", "check", "simulate"):
        raise ParseError(f"{where}.kind: unknown result kind {kind!r}")
    pop = population_from_dict(_field(result, "population", where), f"{where}.population").population
    weights = {r: pop.table.region_total(r) for r in pop.regions}
    cells: tuple[CellRow, ...] = ()
    if "outcome" in result:
        cells = _cells_from_outcome(pop, _field(result["outcome"], "cells", f"{where}.outcome"), f"{where}.outcome.cells")
    return ReportBundle(
        source=kind,
        scale=pop.scale,
        cells=cells,
        density=density_grid(pop.region_dists, weights, pop.scale),
        theorem=result.get("theorem"),
        simulation=result.get("simulation"),
    )


def report_to_dict(bundle: ReportBundle) -> dict[str, Any]:
    d = bundle.density
    doc: dict[str, Any] = {
        "format": REPORT_FORMAT,
        "version": VERSION,
        "source": bundle.source,
        "scale": {"s_min": encode_number(bundle.scale.s_min), "s_max": encode_number(bundle.scale.s_max)},
        "cells": [
            {
                "group": c.group,
                "region": c.region,
                "applicants": encode_number(c.applicants),
                "threshold": encode_number(c.threshold),
                "admit_prob": encode_number(c.admit_prob),
                "admit_count": encode_number(c.admit_count),
            }
            for c in bundle.cells
        ],
        "density": {
            "q": [encode_number(v) for v in d.q],
            "raw_score": [encode_number(v) for v in d.raw_score],
            "regions": [{"id": r, "pdf": [encode_number(v) for v in vals]} for r, vals in d.regions],
            "overall": [encode_number(v) for v in d.overall],
            "integrals": [{"id": r, "trapezoid": encode_number(v)} for r, v in d.integrals],
        },
    }
    if bundle.theorem is not None:
        doc["theorem"] = bundle.theorem
    if bundle.simulation is not None:
        doc["simulation"] = bundle.simulation
    if bundle.fit_residuals is not None:
        doc["fit_residuals"] = {k: encode_number(v) for k, v in bundle.fit_residuals.items()}
    if bundle.fit_loss is not None:
        doc["fit_loss"] = encode_number(bundle.fit_loss)
    return doc


def emit_report(bundle: ReportBundle, path: str | Path) -> None:
    write_json(report_to_dict(bundle), path)


def parse_report(path: str | Path) -> ReportBundle:
    doc = read_json(path)
    where = str(path)
    _check_header(doc, REPORT_FORMAT, where)
    num = decode_number
    scale_doc = _field(doc, "scale", where)
    scale = ScoreScale(num(scale_doc["s_min"], "scale.s_min"), num(scale_doc["s_max"], "scale.s_max"))
    cells = tuple(
        CellRow(
            c["group"],
            c["region"],
            num(c["applicants"], "cells.applicants"),
            num(c["threshold"], "cells.threshold"),
            num(c["admit_prob"], "cells.admit_prob"),
            num(c["admit_count"], "cells.admit_count"),
        )
        for c in _field(doc, "cells", where)
    )
    dd = _field(doc, "density", where)
    density = DensityGrid(
        q=tuple(num(v, "density.q") for v in dd["q"]),
        raw_score=tuple(num(v, "density.raw_score") for v in dd["raw_score"]),
        regions=tuple((r["id"], tuple(num(v, "density.pdf") for v in r["pdf"])) for r in dd["regions"]),
        overall=tuple(num(v, "density.overall") for v in dd["overall"]),
        integrals=tuple((r["id"], num(r["trapezoid"], "density.integrals")) for r in dd["integrals"]),
    )
    residuals = doc.get("fit_residuals")
    return ReportBundle(
        source=_field(doc, "source", where),
        scale=scale,
        cells=cells,
        density=density,
        theorem=doc.get("theorem"),
        simulation=doc.get("simulation"),
        fit_residuals=None if residuals is None else {k: num(v, k) for k, v in residuals.items()},
        fit_loss=None if "fit_loss" not in doc else num(doc["fit_loss"], "fit_loss"),
    )
