"""Regenerate the bundled fixtures.

    python3 fixtures/make_fixtures.py

* ``population.json``: two groups x two regions, counts (30, 10, 20, 40), k = 2,
  theta = (0.3, 0.15), scale (0, 4), g = 50.
* ``synthetic_groups.csv`` / ``synthetic_quantiles.csv``: summary statistics the
  forward model produces from ``synthetic_truth.json`` (3 regions, 5 groups) at
  raw-score cuts 4.0, 3.7, 3.3, 3.0. Fitting them should reach a loss below
  ``FIT_LOSS_THRESHOLD``.
"""

from pathlib import Path

from admitfair.fitter import FitParameters, forward_statistics
from admitfair.gamma import GammaParams, ScoreScale
from admitfair.io import encode_number, write_json, write_population, write_summary_stats
from admitfair.population import DemographicTable, Population

HERE = Path(__file__).resolve().parent
FIT_LOSS_THRESHOLD = 1e-6
CUTS = [4.0, 3.7, 3.3, 3.0]
SCALE = ScoreScale(0.0, 4.0)

TRUTH_REGIONS = {"0": GammaParams(6.0, 0.03), "1": GammaParams(2.0, 0.09), "2": GammaParams(3.0, 0.1165)}
TRUTH_THRESHOLDS = {"0": 0.12, "1": 0.16, "2": 0.30}
TRUTH_COUNTS = {
    "African American": (300.0, 400.0, 900.0),
    "American Indian": (40.0, 50.0, 60.0),
    "Asian": (1500.0, 900.0, 700.0),
    "Hispanic/Latino": (500.0, 900.0, 1800.0),
    "White": (2200.0, 1600.0, 1400.0),
}


def truth() -> FitParameters:
    counts = {(g, r): n for g, row in TRUTH_COUNTS.items() for r, n in zip(TRUTH_REGIONS, row)}
    return FitParameters(TRUTH_REGIONS, TRUTH_THRESHOLDS, counts)


def main() -> None:
    table = DemographicTable.from_nested(
        {"URM": {"poor": 30.0, "rich": 10.0}, "nonURM": {"poor": 20.0, "rich": 40.0}}
    )
    pop = Population(table, {"poor": GammaParams(2.0, 0.3), "rich": GammaParams(2.0, 0.15)}, SCALE)
    write_population(HERE / "population.json", pop, capacity=50.0)

    params = truth()
    stats = forward_statistics(params, SCALE, CUTS)
    write_summary_stats(stats, HERE / "synthetic_groups.csv", HERE / "synthetic_quantiles.csv")
    write_json(
        {
            "regions": [
                {"id": r, "shape": d.shape, "scale_param": d.scale, "threshold": TRUTH_THRESHOLDS[r]}
                for r, d in TRUTH_REGIONS.items()
            ],
            "counts": [{"group": g, "region": r, "n": n} for (g, r), n in params.counts.items()],
            "cuts": CUTS,
            "fit_loss_threshold": encode_number(FIT_LOSS_THRESHOLD),
        },
        HERE / "synthetic_truth.json",
    )


if __name__ == "__main__":
    main()
