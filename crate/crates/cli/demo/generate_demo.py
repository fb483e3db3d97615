"""Regenerate demo.csv. Output is fixed by the seed below."""

import csv
import math
import random

rng = random.Random(20240601)
SITES = ["north", "south", "east"]
rows = []


def logistic(z):
    return 1.0 / (1.0 + math.exp(-z))


for i in range(300):
    site = SITES[i % 3]
    positive = rng.random() < 0.3
    age = round(rng.gauss(62, 9), 1)
    latent = -1.2 + (1.8 if positive else 0.0) + rng.gauss(0, 1.0)
    score = logistic(latent)
    ungradable = rng.random() < 0.05
    hazard = 0.015 * math.exp(1.2 * positive + 0.03 * (age - 62))
    event_time = rng.expovariate(hazard)
    censor_time = min(rng.expovariate(0.02), 36.0)
    rows.append({
        "subject_id": f"S{i + 1:04d}",
        "site_id": site,
        "truth": "pos" if positive else "neg",
        "output": "ungradable" if ungradable else "",
        "score": "" if ungradable else f"{score:.4f}",
        "time": f"{min(event_time, censor_time):.2f}",
        "event": "1" if event_time <= censor_time else "0",
        "age": f"{age}",
        "reference_score": "" if ungradable else f"{min(max(score + rng.gauss(0.01, 0.03), 0.0), 1.0):.4f}",
    })

for s in range(6):
    level = 0.15 + 0.13 * s
    for k, op in enumerate(["op1", "op2", "op3"]):
        shift = rng.gauss(0, 0.01)
        for rep in range(3 * k + 1, 3 * k + 4):
            rows.append({
                "subject_id": f"P{s + 1:02d}",
                "site_id": "lab",
                "score": f"{min(max(level + shift + rng.gauss(0, 0.015), 0.0), 1.0):.4f}",
                "operator_id": op,
                "device_unit_id": "unit1",
                "replicate_index": str(rep),
            })

fields = ["subject_id", "site_id", "truth", "output", "score", "time", "event",
          "operator_id", "device_unit_id", "replicate_index", "age", "reference_score"]
with open("demo.csv", "w", newline="") as fh:
    w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r.get(k, "") for k in fields})
