"""Writes data/gdp_synthetic.csv, a 50-country three-year GDP panel, and
data/gdp_synthetic_assigned.csv, the same panel with a completely
randomized treatment column (25 of 50 treated).

The shape follows a heavy-tailed cross-section of national GDP (billions of
USD) with year-on-year growth of a few percent. Values are synthetic.
"""

import csv
import pathlib

import numpy as np

SEED = 20190501
COUNTRIES = 50


def main() -> None:
    rng = np.random.default_rng(SEED)
    base = np.sort(np.exp(rng.normal(6.3, 1.1, COUNTRIES)))[::-1] + 150.0
    g18 = rng.normal(0.035, 0.03, COUNTRIES)
    g19 = 0.8 * g18 + rng.normal(0.007, 0.015, COUNTRIES)
    gdp2017 = np.round(base, 1)
    gdp2018 = np.round(gdp2017 * (1.0 + g18), 1)
    gdp2019 = np.round(gdp2018 * (1.0 + g19), 1)
    out = pathlib.Path(__file__).resolve().parent.parent / "data" / "gdp_synthetic.csv"
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["country", "gdp2017", "gdp2018", "gdp2019"])
        for i in range(COUNTRIES):
            writer.writerow([f"C{i + 1:02d}", f"{gdp2017[i]:.1f}", f"{gdp2018[i]:.1f}", f"{gdp2019[i]:.1f}"])
    treated = np.zeros(COUNTRIES, dtype=int)
    treated[rng.choice(COUNTRIES, COUNTRIES // 2, replace=False)] = 1
    with out.with_name("gdp_synthetic_assigned.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["country", "gdp2017", "gdp2018", "gdp2019", "treated"])
        for i in range(COUNTRIES):
            writer.writerow(
                [f"C{i + 1:02d}", f"{gdp2017[i]:.1f}", f"{gdp2018[i]:.1f}", f"{gdp2019[i]:.1f}", treated[i]]
            )


if __name__ == "__main__":
    main()
