"""Random statistic specs over a fixed toy schema, shared by several test modules."""

import random

import numpy as np

from modelcritic.data import Dataset
from modelcritic.dsl import AGGREGATES, Agg, Combine, Compare, InQuantileBin, InSet, Predicate, StatisticSpec

SOILS = ("clay", "loam", "sand")


def corpus_dataset(n: int = 60, seed: int = 0) -> Dataset:
    rng = np.random.default_rng(seed)
    return Dataset.from_columns(
        "corpus",
        {
            "g": rng.integers(0, 3, n).tolist(),
            "flag": [bool(b) for b in rng.integers(0, 2, n)],
            "soil": [SOILS[i] for i in rng.integers(0, 3, n)],
            "x": rng.uniform(0, 1, n).tolist(),
            "y": rng.normal(0, 1, n).tolist(),
        },
        "y",
    )


def _atom(r: random.Random):
    choice = r.randrange(5)
    if choice == 0:
        return Compare("g", r.choice(["==", "!=", "<=", ">=", "<", ">"]), r.randrange(3))
    if choice == 1:
        return Compare("soil", r.choice(["==", "!="]), r.choice(SOILS))
    if choice == 2:
        return InSet("soil", tuple(r.sample(SOILS, r.randint(1, 2))))
    if choice == 3:
        return Compare("x", r.choice(["<", ">", "<=", ">="]), round(r.uniform(0.2, 0.8), 3))
    k = r.randint(2, 4)
    return InQuantileBin("x", k, r.randrange(k))


def _agg(r: random.Random) -> Agg:
    kind = r.choice(sorted(AGGREGATES))
    params: tuple = ()
    if kind == "quantile":
        params = (round(r.uniform(0.05, 0.95), 2),)
    elif kind == "proportion_outside":
        lo = round(r.uniform(-2, 0), 1)
        params = (lo, lo + round(r.uniform(0.5, 3), 1))
    where = None
    if r.random() < 0.6:
        where = Predicate(tuple(_atom(r) for _ in range(r.randint(1, 2))))
    return Agg(kind, params, where)


def _expr(r: random.Random, depth: int):
    if depth <= 1 or r.random() < 0.4:
        return _agg(r)
    return Combine(r.choice(["sub", "abs_sub", "ratio"]), _expr(r, depth - 1), _expr(r, depth - 1))


def generate_corpus(n: int = 200, seed: int = 0, max_depth: int = 4) -> list[StatisticSpec]:
    r = random.Random(seed)
    return [StatisticSpec(_expr(r, max_depth)) for _ in range(n)]
