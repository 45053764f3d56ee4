#!/usr/bin/env python3
"""Generates the bundled survey fixture under data/fixtures/mccarty_shape/.

The fixture mimics the shape of a classic 1990s ARD telephone survey: 574
respondents, 32 subpopulations (12 first names, 17 other known groups, 3
hidden), 53 respondents with at least one missing answer. Name columns follow
the degree-dependent reporting profile cleanly; most other known columns get
per-column reporting noise so that evaluating them alone rewards the basic
estimator, mirroring how such subsets behave on real data.
"""

import json
import math
import random
from pathlib import Path

SEED = 20240811
N_RESPONDENTS = 574
N_MISSING_ROWS = 53
N_SINGLE_MISS = 47
TOTAL_POPULATION = 250_000_000

NAMES = [
    ("michael", 4_200_000), ("james", 3_900_000), ("robert", 3_700_000),
    ("david", 3_400_000), ("christopher", 2_300_000), ("anthony", 1_500_000),
    ("jennifer", 1_600_000), ("christina", 900_000), ("jacqueline", 520_000),
    ("stephanie", 840_000), ("nicole", 770_000), ("kimberly", 950_000),
]
OTHERS = [
    ("twin", 3_200_000), ("diabetes", 3_600_000), ("postal_worker", 750_000),
    ("commercial_pilot", 140_000), ("gave_birth", 3_100_000),
    ("adopted_child", 190_000), ("widow_under_65", 2_500_000),
    ("car_accident_victim", 2_900_000), ("suicide_victim", 31_000),
    ("homicide_victim", 24_000), ("aids_patient", 810_000),
    ("dialysis_patient", 220_000), ("jaycee", 290_000),
    ("gun_dealer", 280_000), ("state_prisoner", 1_100_000),
    ("new_business_owner", 2_700_000), ("auto_mechanic", 840_000),
]
HIDDEN = [("homeless", 600_000), ("rape_victim", 2_400_000),
          ("hiv_positive", 800_000)]

CLEAN_NOISE = 0.015     # multiplicative reporting noise sd for on-line columns
MESSY_NOISE = 0.10      # reporting noise sd for weak-signal columns
NAME_SPREAD = 0.80      # name coefficients span +-this fraction of the bound
WEAK_SPREAD = 0.10      # other known columns' coefficient fraction

# Columns reported far more (or less) often than their size and the degree
# profile explain, e.g. rare-but-memorable groups. A flat factor leaves the
# degree slope untouched while pulling the column's size ratio off the line.
RATIO_OFFSETS = {"twin": 1.28, "diabetes": 0.78}


def main() -> None:
    rng = random.Random(SEED)
    degrees = [rng.randint(50, 900) for _ in range(N_RESPONDENTS)]
    mean_d = sum(degrees) / len(degrees)
    g = [d - mean_d for d in degrees]
    bound = 1.0 / max(abs(v) for v in g)

    labels = [n for n, _ in NAMES] + [n for n, _ in OTHERS] + [n for n, _ in HIDDEN]
    sizes = dict(NAMES + OTHERS + HIDDEN)

    coeffs = {}
    noise_sd = {}
    for j, (name, _) in enumerate(NAMES):
        coeffs[name] = (-NAME_SPREAD + 2.0 * NAME_SPREAD * j / (len(NAMES) - 1)) * bound
        noise_sd[name] = CLEAN_NOISE
    coeffs["twin"] = 0.92 * bound
    coeffs["diabetes"] = 0.80 * bound
    noise_sd["twin"] = CLEAN_NOISE
    noise_sd["diabetes"] = CLEAN_NOISE
    weak = [name for name, _ in OTHERS if name not in ("twin", "diabetes")]
    for j, name in enumerate(weak):
        coeffs[name] = (-WEAK_SPREAD + 2.0 * WEAK_SPREAD * j / (len(weak) - 1)) * bound
        noise_sd[name] = MESSY_NOISE
    for j, (name, _) in enumerate(HIDDEN):
        coeffs[name] = (0.3 - 0.25 * j) * bound
        noise_sd[name] = CLEAN_NOISE

    matrix = []
    for name in labels:
        base = sizes[name] / TOTAL_POPULATION
        column_scale = RATIO_OFFSETS.get(name, 1.0) * math.exp(rng.gauss(0.0, noise_sd[name]))
        col = []
        for i, d in enumerate(degrees):
            p = base * column_scale * (1.0 + g[i] * coeffs[name])
            p = min(1.0, max(0.0, p))
            hits = 0
            # binomial via inversion on the survey scale (d <= 3000)
            for _ in range(d):
                if rng.random() < p:
                    hits += 1
            col.append(hits)
        matrix.append(col)

    rows = [[matrix[c][r] for c in range(len(labels))] for r in range(N_RESPONDENTS)]

    miss_rows = rng.sample(range(N_RESPONDENTS), N_MISSING_ROWS)
    text_rows = [[str(v) for v in row] for row in rows]
    for idx, row_index in enumerate(miss_rows):
        count = 1 if idx < N_SINGLE_MISS else rng.randint(2, 5)
        for col in rng.sample(range(len(labels)), count):
            text_rows[row_index][col] = "NA" if rng.random() < 0.5 else ""

    out_dir = Path(__file__).resolve().parent.parent / "data" / "fixtures" / "mccarty_shape"
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "responses.csv", "w") as fh:
        fh.write("id," + ",".join(labels) + "\n")
        for r, row in enumerate(text_rows):
            fh.write(f"r{r + 1:03d}," + ",".join(row) + "\n")
    metadata = {
        "total_population": TOTAL_POPULATION,
        "known_sizes": {name: size for name, size in NAMES + OTHERS},
        "hidden": [name for name, _ in HIDDEN],
    }
    with open(out_dir / "metadata.json", "w") as fh:
        json.dump(metadata, fh, indent=2)
        fh.write("\n")
    print(f"wrote {out_dir}/responses.csv and metadata.json "
          f"({N_RESPONDENTS} rows, {len(labels)} columns, {N_MISSING_ROWS} with gaps)")


if __name__ == "__main__":
    main()
