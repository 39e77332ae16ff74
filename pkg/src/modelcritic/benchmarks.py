"""Labelled model/dataset pairs for measuring detection and false-alarm rates.

A pair is a *discovery* pair when the fitted family differs from the family
that generated the data (the fitted model is lesioned), and a *no-discovery*
pair when they coincide. Seeds are derived from ``(master seed, configuration
name, copy index)`` so any subset of a suite reproduces the same pairs as the
full suite.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np

from .data import CATEGORICAL, INTEGER, REAL, Column, Dataset, DatasetMetadata, ModelRepresentation, ModelSampleSet
from .families import (
    GAUSSIAN,
    GLM,
    LINREG,
    LOGISTIC,
    NEGBIN,
    POISSON,
    STUDENT_T,
    ModelFamily,
    posterior_predictive,
    sample_data,
)

DISCOVERY, NO_DISCOVERY = "discovery", "no_discovery"
DEFAULT_N, DEFAULT_M, DEFAULT_COPIES = 200, 500, 20


@dataclass(frozen=True)
class SuiteEntry:
    name: str
    truth: ModelFamily
    fitted: ModelFamily

    @property
    def label(self) -> str:
        return NO_DISCOVERY if self.truth.family_id == self.fitted.family_id else DISCOVERY

    def to_record(self) -> dict[str, Any]:
        return {"name": self.name, "truth": self.truth.to_record(), "fitted": self.fitted.to_record()}

    @classmethod
    def from_record(cls, rec) -> "SuiteEntry":
        return cls(rec["name"], ModelFamily.from_record(rec["truth"]), ModelFamily.from_record(rec["fitted"]))


@dataclass(frozen=True)
class SuiteConfig:
    entries: tuple[SuiteEntry, ...]
    n: int = DEFAULT_N
    m: int = DEFAULT_M
    copies: int = DEFAULT_COPIES

    def select(self, names: Iterable[str]) -> "SuiteConfig":
        names = list(names)
        known = {e.name for e in self.entries}
        missing = [n for n in names if n not in known]
        if missing:
            raise KeyError(f"unknown configurations {missing}; known: {sorted(known)}")
        return SuiteConfig(tuple(e for e in self.entries if e.name in names), self.n, self.m, self.copies)

    def to_record(self) -> dict[str, Any]:
        return {"n": self.n, "m": self.m, "copies": self.copies,
                "configurations": [e.to_record() for e in self.entries]}

    @classmethod
    def from_record(cls, rec) -> "SuiteConfig":
        return cls(
            tuple(SuiteEntry.from_record(e) for e in rec["configurations"]),
            int(rec.get("n", DEFAULT_N)),
            int(rec.get("m", DEFAULT_M)),
            int(rec.get("copies", DEFAULT_COPIES)),
        )


def standard_suite(n: int = DEFAULT_N, m: int = DEFAULT_M, copies: int = DEFAULT_COPIES) -> SuiteConfig:
    """Three discovery configurations and a self-fit control for each lesioned family."""
    F = ModelFamily
    return SuiteConfig(
        (
            SuiteEntry("t_vs_gaussian", F(STUDENT_T), F(GAUSSIAN)),
            SuiteEntry("negbin_vs_poisson", F(NEGBIN), F(POISSON)),
            SuiteEntry("glm_vs_logistic", F(GLM), F(LOGISTIC)),
            SuiteEntry("gaussian_control", F(GAUSSIAN), F(GAUSSIAN)),
            SuiteEntry("poisson_control", F(POISSON), F(POISSON)),
            SuiteEntry("logistic_control", F(LOGISTIC), F(LOGISTIC)),
        ),
        n, m, copies,
    )


@dataclass(frozen=True, eq=False)
class BenchmarkPair:
    config: str
    dataset: Dataset
    samples: ModelSampleSet
    truth_family: ModelFamily
    fitted_family: ModelFamily
    seed: int
    replicate_index: int

    @property
    def label(self) -> str:
        # derived, so it can never disagree with the families
        return NO_DISCOVERY if self.truth_family.family_id == self.fitted_family.family_id else DISCOVERY

    @property
    def pair_id(self) -> str:
        return f"{self.config}/{self.replicate_index:02d}"

    def manifest_entry(self, dataset_path=None, samples_path=None) -> dict[str, Any]:
        return {
            "pair_id": self.pair_id,
            "config": self.config,
            "label": self.label,
            "truth": self.truth_family.to_record(),
            "fitted": self.fitted_family.to_record(),
            "seed": self.seed,
            "replicate_index": self.replicate_index,
            "n_rows": self.dataset.n_rows,
            "m": self.samples.m,
            "dataset_path": None if dataset_path is None else str(dataset_path),
            "samples_path": None if samples_path is None else str(samples_path),
        }


def pair_seed(master_seed: int, config: str, copy: int) -> int:
    ss = np.random.SeedSequence([int(master_seed), zlib.crc32(config.encode()), int(copy)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_pair(entry: SuiteEntry, copy: int, master_seed: int, n: int, m: int) -> BenchmarkPair:
    seed = pair_seed(master_seed, entry.name, copy)
    data_seed, post_seed = np.random.SeedSequence(seed).spawn(2)
    d = sample_data(entry.truth, n, data_seed, name=f"{entry.name}_{copy:02d}")
    s = posterior_predictive(entry.fitted, d, m, post_seed)
    return BenchmarkPair(entry.name, d, s, entry.truth, entry.fitted, seed, copy)


def iter_suite(config: SuiteConfig, seed: int):
    for entry in config.entries:
        for copy in range(config.copies):
            yield make_pair(entry, copy, seed, config.n, config.m)


def generate_suite(config: SuiteConfig, seed: int) -> list[BenchmarkPair]:
    """All pairs of ``config``: ``copies`` pairs per configuration."""
    return list(iter_suite(config, seed))


# --- radon-style regression scenario --------------------------------------

RADON_N = 500
RADON_COEF = {"intercept": 1.0, "floor": 0.8, "uppm": 0.5, "sigma": 0.3}
RADON_COUNTIES = tuple(f"county_{i}" for i in range(10))
RADON_SOILS = ("clay", "loam", "sand")

RADON_METADATA = DatasetMetadata(
    "Synthetic household radon measurements with the floor the measurement was taken on, "
    "local uranium concentration, county and soil type.",
    {
        "floor": "floor of the measurement: 0 = basement, 1 = first floor",
        "uppm": "soil uranium concentration (ppm)",
        "county": "county of the household",
        "soil": "soil type around the house",
        "radon": "measured radon level",
    },
)

_RADON_PROGRAM = """\
data {{
  int<lower=1> N;
{data_decls}  vector[N] radon;
}}
parameters {{
  real alpha;
{param_decls}  real<lower=0> sigma;
}}
model {{
  radon ~ normal(alpha{terms}, sigma);
}}
"""


def radon_program(features: Sequence[str]) -> str:
    data_decls = "".join(f"  vector[N] {f};\n" for f in features)
    param_decls = "".join(f"  real beta_{f};\n" for f in features)
    terms = "".join(f" + beta_{f} * {f}" for f in features)
    return _RADON_PROGRAM.format(data_decls=data_decls, param_decls=param_decls, terms=terms)


def radon_dataset(seed, n: int = RADON_N) -> Dataset:
    rng = np.random.default_rng(seed)
    floor = rng.integers(0, 2, n)
    uppm = rng.uniform(0.0, 2.0, n)
    county = rng.integers(0, len(RADON_COUNTIES), n)
    soil = rng.integers(0, len(RADON_SOILS), n)
    c = RADON_COEF
    radon = c["intercept"] + c["floor"] * floor + c["uppm"] * uppm + rng.normal(0.0, c["sigma"], n)
    cols = {
        "floor": Column("floor", INTEGER, floor),
        "uppm": Column("uppm", REAL, uppm),
        "county": Column.from_values("county", [RADON_COUNTIES[i] for i in county], CATEGORICAL),
        "soil": Column.from_values("soil", [RADON_SOILS[i] for i in soil], CATEGORICAL),
        "radon": Column("radon", REAL, radon),
    }
    return Dataset("radon_synthetic", cols, "radon")


def radon_scenario(seed, include_floor: bool, n: int = RADON_N, m: int = DEFAULT_M):
    """Radon data plus posterior-predictive replicates from a conjugate regression.

    The fitted model regresses radon on ``uppm`` only (the lesioned model,
    ``include_floor=False``) or on ``uppm`` and ``floor`` (well specified).
    The data always depends on floor; county and soil are pure distractors.
    Returns ``(dataset, samples, model_representation)``.
    """
    data_seed, post_seed = np.random.SeedSequence(int(seed)).spawn(2)
    d = radon_dataset(data_seed, n)
    features = ("uppm", "floor") if include_floor else ("uppm",)
    family = ModelFamily(LINREG, {"features": features, "coef": (0.0,) * len(features)})
    s = posterior_predictive(family, d, m, post_seed)
    model_id = "radon_uppm_floor" if include_floor else "radon_uppm_only"
    s = ModelSampleSet(s.replicates, model_id)
    return d, s, ModelRepresentation(radon_program(features), family)
