"""Regenerates the toy dataset: two leaves under one total, monthly, 2011-2020."""

import math
import random

rng = random.Random(20240611)


def poisson(lam):
    # Knuth's multiplication method; lam stays small here
    limit = math.exp(-lam)
    k, p = 0, 1.0
    while True:
        p *= rng.random()
        if p <= limit:
            return k
        k += 1


rows = []
for year in range(2011, 2021):
    for month in range(1, 13):
        t = (year - 2011) * 12 + month - 1
        a = poisson(20 + 8 * math.sin(2 * math.pi * t / 12) + 0.05 * t)
        b = poisson(12 + 5 * math.cos(2 * math.pi * t / 12))
        rows.append((year, month, a, b))

with open("data.csv", "w") as f:
    f.write("year,week,A,B\n")
    for r in rows:
        f.write("%d,%d,%d,%d\n" % r)
