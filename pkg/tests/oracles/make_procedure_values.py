"""Freeze procedure thresholds for the bundled fixture using mpmath only.

Fixture: counts URM (poor 30, rich 10), nonURM (poor 20, rich 40); k = 2;
theta poor 0.3, rich 0.15; g = 50. Roots are found with mpmath.findroot on
mpmath's regularized incomplete gamma at 40 digits.

    python3 tests/oracles/make_procedure_values.py  # writes tests/data/procedure_oracle.json
"""

import json
from pathlib import Path

import mpmath as mp

OUT = Path(__file__).resolve().parents[1] / "data" / "procedure_oracle.json"

K = mp.mpf(2)
THETA = {"poor": mp.mpf("0.3"), "rich": mp.mpf("0.15")}
COUNTS = {("URM", "poor"): 30, ("URM", "rich"): 10, ("nonURM", "poor"): 20, ("nonURM", "rich"): 40}
G = mp.mpf(50)
N = mp.mpf(100)


def cdf(region, q):
    return mp.gammainc(K, 0, q / THETA[region], regularized=True)


def quantile(region, p):
    return mp.findroot(lambda q: cdf(region, q) - p, (mp.mpf("1e-6"), mp.mpf(10)), solver="anderson")


def main():
    mp.mp.dps = 40
    region_n = {r: sum(n for (_, rr), n in COUNTS.items() if rr == r) for r in THETA}
    q_o = mp.findroot(lambda q: sum(region_n[r] * cdf(r, q) for r in THETA) - G, (mp.mpf("0.01"), mp.mpf(5)), solver="anderson")
    top = {r: quantile(r, G / N) for r in THETA}

    def plus(eta):
        def f(q):
            total = mp.mpf(0)
            for (grp, r), n in COUNTS.items():
                total += n * cdf(r, q / eta if grp == "URM" else q)
            return total - G
        return mp.findroot(f, (mp.mpf("0.01"), mp.mpf(5)), solver="anderson")

    quota_15 = {  # eta = 1.5: eta' = (100 - 1.5 * 40) / 60 = 2/3
        "URM": {r: quantile(r, G * mp.mpf("1.5") / N) for r in THETA},
        "nonURM": {r: quantile(r, G * (mp.mpf(2) / 3) / N) for r in THETA},
    }
    values = {
        "q_o": q_o,
        "top_percentage": top,
        "plus_factor_0.8": plus(mp.mpf("0.8")),
        "plus_factor_0.9": plus(mp.mpf("0.9")),
        "quota_1.5": quota_15,
        "anchor_raw_score": 4 * mp.e ** (-mp.mpf(6) * mp.mpf("0.03")),
    }

    def to_float(v):
        return {k: to_float(x) for k, x in v.items()} if isinstance(v, dict) else float(v)

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(to_float(values), indent=2, sort_keys=True) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
