#!/usr/bin/env python3
"""Regenerate the synthetic 51-region election fixture.

The regions are invented. Six heavy regions have tiny margins (swing
regions), five heavy regions have wide margins (safe regions) and the
remaining forty are small with random margins drawn from a seeded stream.
Outputs regions51.csv and election_regions51.json next to this script.
"""
import csv
import json
import pathlib

import numpy as np

HERE = pathlib.Path(__file__).resolve().parent
SEED = 2016
ADVANTAGE = 63 / 538

SWING = [(29, 0.004), (20, 0.012), (15, 0.008), (13, 0.015), (10, 0.020), (9, 0.018)]
SAFE = [(55, 0.22), (38, 0.16), (34, 0.25), (29, 0.19), (20, 0.18)]


def regions():
    rng = np.random.default_rng(SEED)
    rows = [(w, m) for w, m in SWING] + [(w, m) for w, m in SAFE]
    while len(rows) < 51:
        weight = int(rng.integers(3, 12))
        margin = float(np.round(rng.uniform(0.08, 0.40), 3))
        rows.append((weight, margin))
    return [(f"R{k + 1:02d}", w, m) for k, (w, m) in enumerate(rows)]


def main():
    rows = regions()
    with open(HERE / "regions51.csv", "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["region", "weight", "margin"])
        for name, w, m in rows:
            out.writerow([name, w, m])
    scenario = {
        "kind": "election_indirect",
        "metadata": {
            "name": "synthetic 51-region indirect election",
            "description": "Invented regions: R01-R06 heavy swing regions, "
                           "R07-R11 heavy safe regions, R12-R51 small regions. "
                           "Generated by make_regions.py.",
        },
        "budget": 150000,
        "advantage": ADVANTAGE,
        "regions": [{"name": n, "weight": w, "margin": m} for n, w, m in rows],
    }
    with open(HERE / "election_regions51.json", "w", encoding="utf-8") as fh:
        json.dump(scenario, fh, indent=2)
        fh.write("\n")


if __name__ == "__main__":
    main()
