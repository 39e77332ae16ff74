"""Null distributions, empirical p-values, Bonferroni adjustment and decisions.

The observed statistic is located within the statistic's distribution over
model replicates. With the default upper tail the p-value is the fraction of
replicates whose statistic is at least as large as the observed one (ties
count). Every statistic in a proposal family is adjusted by the family size,
which includes proposals that were rejected before testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .data import Dataset, ModelSampleSet, validate_alignment
from .dsl import StatisticSpec, parse_spec
from .errors import CriticError, EmptyFamilyError, ReplicateEvaluationError, SpecError
from .statistic import bind

UPPER, LOWER, TWO_SIDED = "upper", "lower", "two_sided"
TAILS = (UPPER, LOWER, TWO_SIDED)
BONFERRONI, NO_CORRECTION = "bonferroni", "none"
NULL_QUANTILES = (0.025, 0.25, 0.5, 0.75, 0.975)


def normalize_tail(tail: str) -> str:
    t = tail.replace("-", "_").lower()
    if t not in TAILS:
        raise ValueError(f"tail must be one of {TAILS}, got {tail!r}")
    return t


@dataclass(frozen=True)
class SignificanceConfig:
    alpha: float = 0.05
    tail: str = UPPER
    correction: str = BONFERRONI

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        object.__setattr__(self, "tail", normalize_tail(self.tail))
        if self.correction not in (BONFERRONI, NO_CORRECTION):
            raise ValueError(f"unknown correction {self.correction!r}")


@dataclass(frozen=True, eq=False)
class NullDistribution:
    values: np.ndarray
    spec_id: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or len(v) == 0:
            raise ValueError("null distribution needs at least one value")
        if np.isnan(v).any():
            raise ValueError("null distribution contains NaN")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return len(self.values)

    def summary(self) -> dict[str, float]:
        v = self.values
        finite = v[np.isfinite(v)]
        out = {"min": float(v.min()), "max": float(v.max())}
        if len(finite) == len(v):
            out["mean"] = float(v.mean())
            out["std"] = float(v.std())
        else:
            # mean/std undefined with infinite entries; report them for finite ones
            out["mean"] = float(finite.mean()) if len(finite) else math.nan
            out["std"] = float(finite.std()) if len(finite) else math.nan
            out["n_infinite"] = int(len(v) - len(finite))
        # interpolating between infinities gives NaN, so fall back to order statistics
        method = "linear" if len(finite) == len(v) else "nearest"
        qs = np.quantile(v, NULL_QUANTILES, method=method)
        for q, val in zip(NULL_QUANTILES, qs):
            out[f"q{q:g}"] = float(val)
        return out


def empirical_pvalue(null, observed: float, tail: str = UPPER) -> float:
    """Fraction of null values at least as extreme as ``observed``.

    ``upper``: share of null values ``>= observed``; ``lower``: share
    ``<= observed``; ``two_sided``: ``min(1, 2 * min(upper, lower))``.
    Infinite values compare as extended reals.
    """
    values = null.values if isinstance(null, NullDistribution) else np.asarray(null, dtype=float)
    m = len(values)
    if m == 0:
        raise ValueError("empty null distribution")
    tail = normalize_tail(tail)
    upper = np.count_nonzero(values >= observed) / m
    if tail == UPPER:
        return upper
    lower = np.count_nonzero(values <= observed) / m
    if tail == LOWER:
        return lower
    return min(1.0, 2.0 * min(upper, lower))


def bonferroni_adjust(p_values, family_size: int) -> np.ndarray:
    """``min(1, family_size * p)`` elementwise."""
    p = np.asarray(p_values, dtype=float)
    if family_size < 1:
        raise ValueError("family_size must be >= 1")
    if p.size and family_size < p.size:
        raise ValueError(f"family_size {family_size} smaller than the number of p-values {p.size}")
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    return np.minimum(1.0, family_size * p)


@dataclass(eq=False)
class TestResult:
    __test__ = False  # keep pytest from collecting this class

    spec: StatisticSpec
    observed: float
    null: NullDistribution | None
    p_raw: float
    p_adjusted: float
    tail: str
    family_size: int
    m: int
    null_summary: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.null is not None and not self.null_summary:
            self.null_summary = self.null.summary()

    @property
    def text(self) -> str:
        return self.spec.text

    def to_dict(self, include_null: bool = False) -> dict[str, Any]:
        out = {
            "spec": self.spec.text,
            "observed": _enc(self.observed),
            "null_summary": {k: _enc(v) for k, v in self.null_summary.items()},
            "m": self.m,
            "p_raw": self.p_raw,
            "p_adjusted": self.p_adjusted,
            "tail": self.tail,
            "family_size": self.family_size,
        }
        if include_null and self.null is not None:
            out["null"] = [_enc(v) for v in self.null.values]
        return out

    @classmethod
    def from_dict(cls, rec: dict) -> "TestResult":
        null = None
        if "null" in rec:
            null = NullDistribution(np.array([_dec(v) for v in rec["null"]]), rec["spec"])
        return cls(
            spec=parse_spec(rec["spec"]),
            observed=_dec(rec["observed"]),
            null=null,
            p_raw=float(rec["p_raw"]),
            p_adjusted=float(rec["p_adjusted"]),
            tail=rec["tail"],
            family_size=int(rec["family_size"]),
            m=int(rec["m"]),
            null_summary={k: _dec(v) for k, v in rec.get("null_summary", {}).items()},
        )


def _enc(x):
    """JSON-safe float: infinities and NaN become strings."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return int(x)
    x = float(x)
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


def _dec(x) -> float:
    return float(x)


@dataclass
class DiscrepancyDecision:
    discrepant: bool
    significant: list


def _sort_key(r: TestResult):
    return (r.p_adjusted, r.spec.text)


def decide(results: Sequence[TestResult], cfg: SignificanceConfig) -> DiscrepancyDecision:
    """Discrepant iff the smallest adjusted p-value is ``<= alpha``."""
    if not results:
        raise EmptyFamilyError()
    sizes = {r.family_size for r in results}
    if len(sizes) != 1:
        raise ValueError(f"results come from different families: {sorted(sizes)}")
    significant = sorted((r for r in results if r.p_adjusted <= cfg.alpha), key=_sort_key)
    return DiscrepancyDecision(min(r.p_adjusted for r in results) <= cfg.alpha, significant)


def null_distribution(spec: StatisticSpec, d: Dataset, s: ModelSampleSet, bound=None) -> NullDistribution:
    """Statistic value on every replicate, in replicate order."""
    validate_alignment(d, s)
    bound = bound or bind(spec, d)
    try:
        values = bound.evaluate_many(s.replicates)
    except SpecError as exc:
        raise ReplicateEvaluationError(exc.rows[0] if getattr(exc, "rows", None) else 0, exc) from exc
    return NullDistribution(values, spec.text)


def _test_one(spec, bound, d, s, cfg, family_size) -> TestResult:
    observed = bound.evaluate(d.y)
    null = null_distribution(spec, d, s, bound)
    p = empirical_pvalue(null, observed, cfg.tail)
    p_adj = float(bonferroni_adjust([p], family_size)[0]) if cfg.correction == BONFERRONI else p
    return TestResult(spec, observed, null, p, p_adj, cfg.tail, family_size, s.m)


@dataclass
class CheckReport:
    dataset: str
    model_id: str
    n_rows: int
    m: int
    cfg: SignificanceConfig
    family_size: int
    results: list
    rejected: list  # (text, reason) pairs

    @property
    def decision(self) -> DiscrepancyDecision:
        if not self.results:
            return DiscrepancyDecision(False, [])
        return decide(self.results, self.cfg)

    @property
    def discrepant(self) -> bool:
        return self.decision.discrepant

    def ordered_results(self) -> list:
        return sorted(self.results, key=_sort_key)

    def to_dict(self, include_null: bool = False) -> dict[str, Any]:
        return {
            "dataset": self.dataset,
            "model_id": self.model_id,
            "n_rows": self.n_rows,
            "m": self.m,
            "alpha": self.cfg.alpha,
            "tail": self.cfg.tail,
            "correction": self.cfg.correction,
            "family_size": self.family_size,
            "discrepant": self.discrepant,
            "results": [r.to_dict(include_null) for r in self.ordered_results()],
            "rejected": [{"spec": t, "reason": why} for t, why in self.rejected],
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "CheckReport":
        cfg = SignificanceConfig(rec["alpha"], rec["tail"], rec["correction"])
        return cls(
            rec["dataset"],
            rec["model_id"],
            int(rec["n_rows"]),
            int(rec["m"]),
            cfg,
            int(rec["family_size"]),
            [TestResult.from_dict(r) for r in rec["results"]],
            [(r["spec"], r["reason"]) for r in rec.get("rejected", [])],
        )


def rejection_reason(exc: Exception) -> str:
    if isinstance(exc, ReplicateEvaluationError):
        return f"replicate_failure: {exc}"
    return f"{getattr(exc, 'reason', 'invalid')}: {exc}"


def run_check(
    d: Dataset,
    s: ModelSampleSet,
    specs: Sequence,
    cfg: SignificanceConfig | None = None,
    rejected: Sequence = (),
    family_size: int | None = None,
) -> CheckReport:
    """Test every statistic in ``specs`` against the replicates in ``s``.

    ``specs`` may hold parsed specs or DSL text. Statistics that fail to parse,
    fail on the observed data, or fail on any replicate are moved to the
    rejected list; they still count toward the Bonferroni family, whose size
    defaults to ``len(specs) + len(rejected)``.
    """
    cfg = cfg or SignificanceConfig()
    validate_alignment(d, s)
    rejected = [tuple(r) for r in rejected]
    if family_size is None:
        family_size = len(specs) + len(rejected)
    if family_size < len(specs):
        raise ValueError("family_size cannot be smaller than the number of specs")
    results = []
    for item in specs:
        text = item if isinstance(item, str) else item.text
        try:
            spec = parse_spec(item) if isinstance(item, str) else item
            bound = bind(spec, d)
            bound.evaluate(d.y)
            results.append(_test_one(spec, bound, d, s, cfg, family_size))
        except CriticError as exc:
            rejected.append((text, rejection_reason(exc)))
    return CheckReport(d.name, s.model_id, d.n_rows, s.m, cfg, family_size, results, rejected)
