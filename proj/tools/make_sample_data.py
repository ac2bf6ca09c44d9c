#!/usr/bin/env python3
"""Writes data/navrongo_sample.csv: a synthetic monthly series (Jan 1997 to
Dec 2008) shaped like the Navrongo meningitis data.

Nothing here is real surveillance data. Seasonal totals, the monthly case
distribution and the covariate moments are chosen to match the published
summary table (364 in-season cases over the 11 July-June seasons 1997/98 to
2007/08; monthly covariate means and SDs). Population is given only at three
anchor months; the other cells are NA and get interpolated on ingestion.
"""

import argparse
import csv
import pathlib

import numpy as np

FIRST_YEAR, LAST_YEAR = 1997, 2008

# Season (July-June) totals: sum 364, range 0..115, SD about 42.6.
SEASON_TOTALS = [1, 0, 115, 110, 12, 8, 50, 20, 5, 42, 1]
# Share of a season's cases by month, keyed by calendar month.
SEASON_PROFILE = {12: 0.04, 1: 0.12, 2: 0.22, 3: 0.365, 4: 0.19, 5: 0.065}

# (mean, sd, low, high) per covariate, monthly.
MOMENTS = {
    "tmax_c": (35.4, 3.1, 29.9, 41.1),
    "tmin_c": (23.0, 2.2, 18.1, 28.3),
    "humidity3pm_pct": (39.5, 20.6, 6.0, 73.0),
}

POPULATION_ANCHORS = {(1998, 1): 141046, (2008, 12): 153236}


def apportion(total, weights):
    weights = np.asarray(weights, dtype=float)
    raw = total * weights / weights.sum()
    counts = np.floor(raw).astype(int)
    order = np.argsort(-(raw - counts), kind="stable")
    for i in order[: total - counts.sum()]:
        counts[i] += 1
    return counts


def calibrate(x, mean, sd, low, high):
    z = (x - x.mean()) / x.std(ddof=1)
    return np.clip(mean + sd * z, low, high)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data" / "navrongo_sample.csv"))
    parser.add_argument("--seed", type=int, default=19980101)
    args = parser.parse_args()
    rng = np.random.default_rng(args.seed)

    months = [(y, m) for y in range(FIRST_YEAR, LAST_YEAR + 1) for m in range(1, 13)]
    n = len(months)
    cal = np.array([m for _, m in months])
    phase = 2.0 * np.pi * (cal - 1) / 12.0

    cases = np.zeros(n, dtype=int)
    for s, total in enumerate(SEASON_TOTALS):
        start = months.index((FIRST_YEAR + s, 7))
        idx = list(range(start, start + 12))
        weights = [SEASON_PROFILE.get(months[i][1], 0.0) for i in idx]
        cases[idx] = apportion(total, weights)

    # Hot dry season peaks in March-April, humidity in August.
    tmax = calibrate(np.cos(phase - 2.0 * np.pi * 2.5 / 12) + 0.25 * rng.standard_normal(n), *MOMENTS["tmax_c"])
    tmin = calibrate(np.cos(phase - 2.0 * np.pi * 3.2 / 12) + 0.35 * rng.standard_normal(n), *MOMENTS["tmin_c"])
    humid = calibrate(np.cos(phase - 2.0 * np.pi * 7.3 / 12) + 0.2 * rng.standard_normal(n), *MOMENTS["humidity3pm_pct"])

    # Harmattan dust December to March: near-saturated, otherwise none.
    harmattan = np.isin(cal, [12, 1, 2, 3])
    dust = np.where(harmattan, np.clip(rng.normal(92.0, 12.0, n), 40.0, 100.0), 0.0)
    dust[np.isin(cal, [11]) & (rng.random(n) < 0.5)] = rng.uniform(5.0, 40.0)

    # Dry-season fires November to February, a skewed positive series.
    fire = np.isin(cal, [11, 12, 1, 2])
    co = np.where(fire, rng.gamma(1.6, 28.0, n), rng.exponential(0.3, n))
    co = np.clip(co, 0.0, 160.4)

    pneumonia = np.where(np.isin(cal, [1, 2, 3, 4]), rng.poisson(3.6, n), rng.poisson(0.35, n))
    pneumonia = np.minimum(pneumonia, 14)

    slope = (POPULATION_ANCHORS[(2008, 12)] - POPULATION_ANCHORS[(1998, 1)]) / (12 * 10 + 11)
    anchors = dict(POPULATION_ANCHORS)
    anchors[(1997, 1)] = int(round(POPULATION_ANCHORS[(1998, 1)] - 12 * slope))

    out = pathlib.Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["year", "month", "cases", "tmax_c", "tmin_c", "humidity3pm_pct", "dust_pct", "co_g_per_day", "pneumonia", "population"])
        for i, (y, m) in enumerate(months):
            pop = anchors.get((y, m))
            w.writerow([y, m, int(cases[i]), f"{tmax[i]:.1f}", f"{tmin[i]:.1f}", f"{humid[i]:.1f}", f"{dust[i]:.1f}",
                        f"{co[i]:.1f}", int(pneumonia[i]), "NA" if pop is None else pop])


if __name__ == "__main__":
    main()
