"""Seeded scenario generators shared by the acceptance and property tests."""
from __future__ import annotations

import itertools
import random

from ceerlab.constructions import partitions
from ceerlab.harness import parse_scenario

SCHEMA = "ceerlab/1"


def fin(*xs):
    return {"kind": "finite", "elems": sorted(set(xs))}


def cof(*xs):
    return {"kind": "cofinite", "missing": sorted(set(xs))}


ALL = {"kind": "all"}


def per(mod, res, offset=0):
    return {"kind": "periodic", "mod": mod, "res": sorted(set(res)), "offset": offset}


def columnar(cols: dict, default=None):
    out = {"kind": "columnar", "cols": {str(k): v for k, v in cols.items()}}
    if default is not None:
        out["default"] = default
    return out


def scenario(**body):
    body.setdefault("name", "generated")
    return parse_scenario({"schema": SCHEMA, **body})


def random_partition(rng: random.Random, k: int) -> list[list[int]]:
    labels = [rng.randrange(k) for _ in range(k)]
    classes: dict = {}
    for x, c in enumerate(labels):
        classes.setdefault(c, []).append(x)
    return list(classes.values())


# ------------------------------------------------------------- chip game

def pi02_scenario(rng: random.Random, k: int, name: str):
    table = random_partition(rng, k)
    cls = {x: i for i, c in enumerate(table) for x in c}
    cross = [p for p in itertools.combinations(range(k), 2) if cls[p[0]] != cls[p[1]]]
    noise = []
    budget = rng.randint(0, 3)
    for _ in range(budget if cross else 0):
        noise.append({"pair": list(rng.choice(cross)), "stages": [rng.randrange(1, 40)]})
    chips = {"period": rng.randint(1, 12), "phase": rng.randrange(0, 5), "noise": noise}
    return scenario(name=name, construction="pi02_to_eqce", relation={"table": table},
                    chips=chips, horizon=4000, window=400)


# ------------------------------------------------------------- column sets

def random_column(rng: random.Random):
    r = rng.random()
    if r < 0.2:
        return fin()
    if r < 0.55:
        return fin(*rng.sample(range(6), rng.randint(1, 2)))
    if r < 0.8:
        return cof(*rng.sample(range(5), rng.randint(0, 2)))
    return ALL


def present(rng: random.Random, colset: list, span: int):
    """A columnar literal whose set of columns is ``colset`` (which includes the empty column).

    Non-empty members are spread over columns 0..span-2, repeating some;
    the default column is empty.
    """
    members = [c for c in colset if c != fin()]
    slots = span - 1
    if len(members) > slots:
        raise ValueError("column set does not fit the span")
    placed = members + [rng.choice(members) for _ in range(slots - len(members))] if members else []
    rng.shuffle(placed)
    cols = {k: c for k, c in enumerate(placed)}
    return columnar(cols)


def random_colset(rng: random.Random, size: int):
    out = [fin()]
    while len(out) < size + 1:
        c = random_column(rng)
        if c not in out:
            out.append(c)
    return out


def e3_scenario(rng: random.Random, construction: str, blocks: list[list[int]], span: int, name: str,
                horizon: int = 5000, window: int = 500):
    """One input per field index; inputs in the same block present the same column set."""
    n = sum(len(b) for b in blocks)
    descs = [None] * n
    used = []
    for block in blocks:
        while True:
            cs = random_colset(rng, rng.randint(1, span - 1))
            key = sorted(map(str, cs))
            if key not in used:
                used.append(key)
                break
        for x in block:
            descs[x] = present(rng, cs, span)
    return scenario(name=name, construction=construction, descriptions=descs,
                    params={"span": span}, horizon=horizon, window=window)


def set_partitions(n: int):
    return partitions(list(range(n)))


# ------------------------------------------------------------- flat sets

def random_flat(rng: random.Random):
    r = rng.random()
    if r < 0.15:
        return fin()
    if r < 0.35:
        return fin(*rng.sample(range(12), rng.randint(1, 3)))
    if r < 0.75:
        mod = rng.randint(2, 4)
        res = rng.sample(range(mod), rng.randint(1, mod - 1))
        return per(mod, res, rng.choice([0, 0, 2, 5]))
    if r < 0.9:
        return cof(*rng.sample(range(10), rng.randint(0, 2)))
    return ALL


def near(rng: random.Random, lit):
    """A literal at finite distance from ``lit`` (same density, maybe same maximum)."""
    if lit["kind"] == "finite":
        return fin(*rng.sample(range(15), rng.randint(0, 3)))
    if lit["kind"] == "periodic":
        return dict(lit, offset=lit["offset"] + lit["mod"] * rng.randint(0, 2))
    if lit["kind"] == "cofinite":
        return cof(*rng.sample(range(10), rng.randint(0, 2)))
    return cof(rng.randrange(6))
