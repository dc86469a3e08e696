"""Brute-force MASE for the mean, naive and seasonal naive forecasts on the toy
dataset. Writes the long accuracy layout for those three methods to stdout.

    python3 toy_baselines.py ../../data/toy > ../golden/toy_baselines.csv
"""

import csv
import sys
from decimal import Decimal

PERIOD = 12
GRANULARITIES = [("w", 1), ("2w", 2), ("m4w", 4), ("q", 3), ("sa", 6), ("a", 12)]


def fmt(x):
    # shortest round-trip digits, positional notation
    s = format(Decimal(repr(x)), "f")
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    return s


def load(root):
    with open(f"{root}/data.csv") as f:
        rows = list(csv.DictReader(f))
    with open(f"{root}/hierarchy.csv") as f:
        hier = list(csv.DictReader(f))
    with open(f"{root}/splits.csv") as f:
        splits = list(csv.DictReader(f))
    leaves = [h["node_id"] for h in hier if not any(c["parent"] == h["node_id"] for c in hier)]
    stamps = [(int(r["year"]), int(r["week"])) for r in rows]
    series = {leaf: [float(r[leaf]) for r in rows] for leaf in leaves}

    def total(node):
        kids = [h["node_id"] for h in hier if h["parent"] == node]
        if not kids:
            return series[node]
        parts = [total(k) for k in kids]
        return [sum(p[t] for p in parts) for t in range(len(stamps))]

    order = sorted(hier, key=lambda h: (int(h["level"]), hier.index(h)))
    nodes = [h["node_id"] for h in order]
    return stamps, {n: total(n) for n in nodes}, nodes, splits


def stamp(text):
    y, w = text.split("-")
    return int(y), int(w)


def blocks(y, k):
    y = y[len(y) % k:]
    out = []
    for i in range(0, len(y), k):
        acc = 0.0
        for v in y[i:i + k]:
            acc += v
        out.append(acc)
    return out


def mase(actual, forecast, train, m):
    q = 0.0
    for t in range(m, len(train)):
        q += abs(train[t] - train[t - m])
    q /= len(train) - m
    mae = 0.0
    for a, f in zip(actual, forecast):
        mae += abs(a - f)
    mae /= len(actual)
    return mae / q


def main(root):
    stamps, data, nodes, splits = load(root)
    print("split,granularity,node_id,method,mase")
    for sp in splits:
        a = stamps.index(stamp(sp["train_start"]))
        b = stamps.index(stamp(sp["train_end"]))
        c = stamps.index(stamp(sp["test_start"]))
        d = stamps.index(stamp(sp["test_end"]))
        for tag, k in GRANULARITIES:
            m = PERIOD // k
            for node in nodes:
                train = blocks(data[node][a:b + 1], k)
                test = blocks(data[node][c:d + 1], k)
                h = len(test)
                out = []
                if m > 1:
                    snv = [train[len(train) + s - m * ((s - 1) // m + 1) - 1] for s in range(1, h + 1)]
                    out.append(("snv", snv))
                out.append(("nve", [train[-1]] * h))
                total = 0.0
                for v in train:
                    total += v
                out.append(("avg", [total / len(train)] * h))
                for method, fc in out:
                    print(f"{sp['name']},{tag},{node},{method},{fmt(mase(test, fc, train, m))}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/toy")
