"""Instance builders shared by the test modules."""

from __future__ import annotations

import numpy as np

from admitfair.gamma import GammaParams, ScoreScale
from admitfair.population import DemographicTable, Population, validate_theorem_setting
from admitfair.procedures import default_threshold, pdf_intersection


def make_pop(urm_poor, urm_rich, rest_poor, rest_rich, k_poor, theta_poor, k_rich, theta_rich):
    table = DemographicTable.from_nested(
        {"URM": {"poor": urm_poor, "rich": urm_rich}, "nonURM": {"poor": rest_poor, "rich": rest_rich}}
    )
    return Population(
        table,
        {"poor": GammaParams(k_poor, theta_poor), "rich": GammaParams(k_rich, theta_rich)},
        ScoreScale(0.0, 4.0),
    )


def random_instance(rng: np.random.Generator, equal_shapes: bool | None = None):
    """A validated two-group, two-region instance and capacity.

    Ranges: shapes in [1, 10], scales in [0.01, 1], counts in [1, 100],
    g in (0.05 n, 0.95 n). Rich dominance comes from the rich region having the
    smaller (or equal) shape and the strictly smaller scale; candidates failing
    the setting checks are redrawn.
    """
    while True:
        counts = rng.integers(1, 101, size=4).astype(float)
        ks = rng.uniform(1.0, 10.0, size=2)
        thetas = rng.uniform(0.01, 1.0, size=2)
        same = rng.random() < 0.5 if equal_shapes is None else equal_shapes
        if same:
            ks[:] = ks[0]
        if thetas[0] == thetas[1]:
            continue
        k_rich, k_poor = min(ks), max(ks)
        theta_rich, theta_poor = min(thetas), max(thetas)
        pop = make_pop(*counts, k_poor, theta_poor, k_rich, theta_rich)
        g = float(rng.uniform(0.05, 0.95) * pop.total)
        if not 0.05 * pop.total < g < 0.95 * pop.total:
            continue
        if validate_theorem_setting(pop, g):
            continue
        return pop, g


def random_quota_eta(rng: np.random.Generator, pop: Population, g: float) -> float:
    """eta in [1, min(n / n_urm, n / g)], so both admit probabilities stay in [0, 1]."""
    upper = min(pop.total / pop.table.group_total("URM"), pop.total / g)
    return float(rng.uniform(1.0, upper))


def random_theorem2_instance(rng: np.random.Generator):
    """Rejection-sample an equal-shape instance with q_o below the density crossing and eta in [q_o/q~, 1)."""
    while True:
        pop, g = random_instance(rng, equal_shapes=True)
        poor, rich = pop.dist("poor"), pop.dist("rich")
        q_o = default_threshold(pop, g)
        q_tilde = pdf_intersection(rich.shape, poor.scale, rich.scale)
        if not q_tilde - q_o > 1e-10:
            continue
        lb = q_o / q_tilde
        eta = float(rng.uniform(lb, 1.0))
        if lb <= eta < 1.0:
            return pop, g, eta
