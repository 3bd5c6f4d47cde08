#!/usr/bin/env python3
"""Regenerates the COO fixtures in this directory. Output is deterministic."""

import math
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent


def poisson(rng, lam):
    limit, k, p = math.exp(-lam), 0, 1.0
    while True:
        p *= rng.random()
        if p <= limit:
            return k
        k += 1


def write_coo(path, dims, entries, note):
    with open(path, "w") as out:
        out.write(f"# {note}\n")
        out.write(f"# dims {dims[0]} {dims[1]} {dims[2]}\n")
        for (i, j, t), v in sorted(entries.items(), key=lambda e: (e[0][2], e[0][1], e[0][0])):
            out.write(f"{i + 1} {j + 1} {t + 1} {v:g}\n")


def tiny():
    """20 x 15 x 5 counts from three overlapping blocks with slowly drifting activity."""
    rng = random.Random(20)
    blocks = [(range(0, 8), range(0, 6)), (range(6, 14), range(5, 11)), (range(12, 20), range(9, 15))]
    entries = {}
    for b, (rows, cols) in enumerate(blocks):
        for t in range(5):
            rate = 0.6 + 0.25 * (t if b != 1 else 4 - t)
            for i in rows:
                for j in cols:
                    c = poisson(rng, rate * 0.5)
                    if c:
                        entries[(i, j, t)] = entries.get((i, j, t), 0) + c
    write_coo(HERE / "tiny20x15x5.coo", (20, 15, 5), entries, "20 x 15 x 5 block-structured counts")


def biblio():
    """Author x venue x year counts: 150 authors, 40 venues, 17 years.

    Authors belong to one or two research areas (groups of venues), enter and leave the
    field at random years, and publish a Poisson number of papers per year in their areas
    with a mild preference for a few favourite venues.
    """
    rng = random.Random(1991)
    authors, venues, years, areas = 150, 40, 17, 6
    area_venues = [list(range(a * venues // areas, (a + 1) * venues // areas)) for a in range(areas)]
    entries = {}
    for i in range(authors):
        mine = rng.sample(range(areas), 2 if rng.random() < 0.3 else 1)
        start = rng.randrange(0, years - 3)
        stop = min(years, start + rng.randrange(4, years + 1))
        productivity = rng.uniform(0.5, 3.0)
        favourites = [rng.choice(area_venues[a]) for a in mine for _ in range(2)]
        for t in range(start, stop):
            papers = poisson(rng, productivity * (0.6 + 0.8 * (t - start) / max(1, stop - start)))
            for _ in range(papers):
                j = rng.choice(favourites) if rng.random() < 0.6 else rng.choice(area_venues[rng.choice(mine)])
                entries[(i, j, t)] = entries.get((i, j, t), 0) + 1
    write_coo(HERE / "biblio150x40x17.coo", (authors, venues, years), entries,
              "synthetic author x venue x year publication counts")


if __name__ == "__main__":
    tiny()
    biblio()
