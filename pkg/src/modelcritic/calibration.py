"""Detection and false-alarm rates over labelled benchmark suites.

A :class:`CalibrationRun` stores one number per pair, the smallest adjusted
p-value over the statistic family. Decisions at any significance level follow
from that number alone, so ROC sweeps never re-evaluate statistics.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.stats import norm

from .benchmarks import DISCOVERY, NO_DISCOVERY, BenchmarkPair
from .checks import SignificanceConfig, run_check
from .errors import CriticError
from .proposer import baseline_specs, propose_catalog, validate_batch

logger = logging.getLogger(__name__)

CATALOG, BASELINE, EXTERNAL = "catalog", "baseline_mean_variance", "external"
SPEC_SOURCES = (CATALOG, BASELINE, EXTERNAL)
RUN_SCHEMA_VERSION = 1
CALIBRATION_ALPHAS = (0.01, 0.05, 0.1, 0.2)


def default_alpha_grid(n: int = 50, lo: float = 0.001, hi: float = 0.5) -> np.ndarray:
    return np.geomspace(lo, hi, n)


@dataclass
class CalibrationRun:
    """Per-pair ``(label, min adjusted p)`` records plus the alpha grid.

    Attributes
    ----------
    decisions : dict
        ``pair_id -> (label, min_adjusted_p)``.
    alpha_grid : ndarray
        Strictly increasing significance levels in (0, 1).
    spec_source : str
        Where the statistics came from (catalog, baseline or external).
    excluded : dict
        ``pair_id -> reason`` for pairs whose check failed entirely.
    """

    decisions: dict
    alpha_grid: np.ndarray = field(default_factory=default_alpha_grid)
    spec_source: str = CATALOG
    excluded: dict = field(default_factory=dict)
    family_sizes: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.alpha_grid, dtype=float)
        if g.ndim != 1 or len(g) == 0:
            raise ValueError("alpha_grid must be a nonempty vector")
        if np.any(np.diff(g) <= 0):
            raise ValueError("alpha_grid must be strictly increasing")
        if np.any((g <= 0) | (g >= 1)):
            raise ValueError("alpha_grid values must lie in (0, 1)")
        self.alpha_grid = g
        if self.spec_source not in SPEC_SOURCES:
            raise ValueError(f"unknown spec_source {self.spec_source!r}")
        for pid, (label, p) in self.decisions.items():
            if label not in (DISCOVERY, NO_DISCOVERY):
                raise ValueError(f"pair {pid}: unknown label {label!r}")
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"pair {pid}: min p {p} outside [0, 1]")

    def min_p(self, label: str) -> np.ndarray:
        return np.array([p for lab, p in self.decisions.values() if lab == label], dtype=float)

    def decision(self, pair_id: str, alpha: float) -> bool:
        return self.decisions[pair_id][1] <= alpha

    def to_dict(self) -> dict[str, Any]:
        return {
            "run_schema_version": RUN_SCHEMA_VERSION,
            "spec_source": self.spec_source,
            "alpha_grid": [float(a) for a in self.alpha_grid],
            "decisions": {
                pid: {"label": lab, "min_adjusted_p": float(p), "family_size": self.family_sizes.get(pid)}
                for pid, (lab, p) in sorted(self.decisions.items())
            },
            "excluded": dict(sorted(self.excluded.items())),
        }

    @classmethod
    def from_dict(cls, rec) -> "CalibrationRun":
        if not isinstance(rec, dict):
            raise ValueError("expected a JSON object")
        if rec.get("run_schema_version") != RUN_SCHEMA_VERSION:
            raise ValueError(f"unsupported run_schema_version {rec.get('run_schema_version')!r}")
        dec = rec["decisions"]
        return cls(
            {pid: (v["label"], float(v["min_adjusted_p"])) for pid, v in dec.items()},
            np.array(rec["alpha_grid"], dtype=float),
            rec["spec_source"],
            dict(rec.get("excluded", {})),
            {pid: v.get("family_size") for pid, v in dec.items() if v.get("family_size") is not None},
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def loads(cls, text: str) -> "CalibrationRun":
        return cls.from_dict(json.loads(text))


def _specs_for(pair: BenchmarkPair, specs, n_proposals: int, seed: int):
    """Return ``(accepted specs, rejected, family_size, source)`` for one pair."""
    if specs == CATALOG:
        batch = validate_batch(propose_catalog(pair.dataset.schema(), n_proposals, seed), pair.dataset)
        return batch.accepted, batch.rejected, batch.family_size, CATALOG
    if specs in ("baseline", BASELINE):
        return baseline_specs(), [], 2, BASELINE
    specs = list(specs)
    return specs, [], len(specs), EXTERNAL


def evaluate_suite(pairs: Sequence[BenchmarkPair], specs="catalog", cfg: SignificanceConfig | None = None,
                   n_proposals: int = 24, seed: int = 0, alpha_grid=None,
                   spec_source: str | None = None) -> CalibrationRun:
    """Run the check on every pair and keep the smallest adjusted p-value.

    Parameters
    ----------
    pairs : sequence of BenchmarkPair
    specs : "catalog", "baseline" or a sequence of specs
        ``"catalog"`` proposes ``n_proposals`` statistics per pair from the
        pair's schema; ``"baseline"`` uses global mean and variance; a
        sequence is used as given for every pair.
    cfg : SignificanceConfig, optional
    """
    if not pairs:
        raise ValueError("empty suite")
    if not isinstance(specs, str) and not list(specs):
        raise ValueError("empty statistic family")
    cfg = cfg or SignificanceConfig()
    decisions, excluded, sizes = {}, {}, {}
    source = None
    for pair in pairs:
        accepted, rejected, fam, source = _specs_for(pair, specs, n_proposals, seed)
        try:
            rep = run_check(pair.dataset, pair.samples, accepted, cfg, rejected, fam)
        except CriticError as exc:
            excluded[pair.pair_id] = f"{type(exc).__name__}: {exc}"
            continue
        if not rep.results:
            excluded[pair.pair_id] = "no statistic could be evaluated"
            continue
        decisions[pair.pair_id] = (pair.label, min(r.p_adjusted for r in rep.results))
        sizes[pair.pair_id] = rep.family_size
    if excluded:
        logger.warning("%d pairs excluded from the run", len(excluded))
    grid = default_alpha_grid() if alpha_grid is None else alpha_grid
    return CalibrationRun(decisions, grid, spec_source or source, excluded, sizes)


def rates(run: CalibrationRun, alpha: float) -> tuple[float | None, float | None]:
    """``(tpr, fpr)`` at ``alpha``; a rate is ``None`` when its class is empty."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    out = []
    for label in (DISCOVERY, NO_DISCOVERY):
        p = run.min_p(label)
        out.append(None if len(p) == 0 else float(np.count_nonzero(p <= alpha) / len(p)))
    return out[0], out[1]


@dataclass
class RocCurve:
    points: list  # (alpha, fpr, tpr)
    counts: tuple  # (n_discovery, n_no_discovery)

    def fpr(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    def tpr(self) -> np.ndarray:
        return np.array([p[2] for p in self.points])

    def tpr_at_fpr(self, fpr: float) -> float:
        """Best TPR reachable without exceeding ``fpr`` (0 when no point qualifies)."""
        ok = [t for _, f, t in self.points if f <= fpr + 1e-12]
        return max(ok) if ok else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["alpha", "fpr", "tpr"])
        for a, f, t in self.points:
            w.writerow([repr(float(a)), repr(float(f)), repr(float(t))])
        return buf.getvalue()


def roc(run: CalibrationRun) -> RocCurve:
    n_d, n_n = len(run.min_p(DISCOVERY)), len(run.min_p(NO_DISCOVERY))
    if n_d == 0 or n_n == 0:
        raise ValueError("ROC needs both discovery and no-discovery pairs")
    points = []
    for a in run.alpha_grid:
        tpr, fpr = rates(run, float(a))
        points.append((float(a), fpr, tpr))
    return RocCurve(points, (n_d, n_n))


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError("need 0 <= successes <= trials and trials >= 1")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    lo, hi = wilson_interval_frac(successes / trials, trials, confidence)
    # pin the boundaries exactly; the formula gives them only up to rounding
    lo = 0.0 if successes == 0 else lo
    hi = 1.0 if successes == trials else hi
    return lo, hi


def fpr_band(alpha: float, n_pairs: int, m: int, confidence: float = 0.95) -> tuple[float, float]:
    """Acceptance band for an observed FPR at nominal ``alpha``.

    Wilson interval at the expected count ``alpha * n_pairs`` widened by the
    p-value resolution ``1/m`` on both sides.
    """
    lo, hi = wilson_interval_frac(alpha, n_pairs, confidence)
    return max(0.0, lo - 1.0 / m), min(1.0, hi + 1.0 / m)


def wilson_interval_frac(p: float, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson interval with a fractional success proportion ``p``."""
    z = float(norm.ppf(0.5 + confidence / 2))
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class CalibrationRow:
    alpha: float
    fpr: float
    lo: float
    hi: float
    n: int

    @property
    def within(self) -> bool:
        return self.lo <= self.fpr <= self.hi


def fpr_calibration(run: CalibrationRun, alphas: Sequence[float] = CALIBRATION_ALPHAS,
                    m: int | None = None) -> list[CalibrationRow]:
    """Observed FPR against nominal alpha with its acceptance band."""
    n = len(run.min_p(NO_DISCOVERY))
    if n == 0:
        raise ValueError("no no-discovery pairs in run")
    rows = []
    for a in alphas:
        _, fpr = rates(run, a)
        lo, hi = fpr_band(a, n, m) if m else wilson_interval_frac(a, n)
        rows.append(CalibrationRow(float(a), fpr, lo, hi, n))
    return rows


def calibration_csv(rows: Sequence[CalibrationRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", "fpr", "band_lo", "band_hi", "n_no_discovery", "within"])
    for r in rows:
        w.writerow([repr(r.alpha), repr(r.fpr), repr(r.lo), repr(r.hi), r.n, int(r.within)])
    return buf.getvalue()


@dataclass
class Dominance:
    dominates: bool
    strict_somewhere: bool
    worst_gap: float  # min over shared fpr of tpr_a - tpr_b

    def describe(self, a: str = "catalog", b: str = "baseline") -> str:
        if self.dominates and self.strict_somewhere:
            return f"{a} dominates {b} (strictly better at some false positive rate)"
        if self.dominates:
            return f"{a} matches {b} at every false positive rate"
        return f"{a} does not dominate {b} (largest shortfall {-self.worst_gap:.3f})"


def dominance(a: RocCurve, b: RocCurve, tol: float = 0.0) -> Dominance:
    """Compare best reachable TPR at every FPR level inside both curves' ranges.

    Only FPR values attained by either curve and lying in the overlap of the
    two attained ranges are compared; outside the overlap one curve has no
    operating point to compare against.
    """
    fa, fb = a.fpr(), b.fpr()
    lo, hi = max(fa.min(), fb.min()), min(fa.max(), fb.max())
    shared = sorted(f for f in set(fa.tolist()) | set(fb.tolist()) if lo <= f <= hi)
    if not shared:
        return Dominance(False, False, -1.0)
    gaps = [a.tpr_at_fpr(f) - b.tpr_at_fpr(f) for f in shared]
    worst = min(gaps)
    return Dominance(worst >= -tol, max(gaps) > 0, worst)


def summary_markdown(runs: dict[str, CalibrationRun], m: int | None = None) -> str:
    """Markdown summary of one or more runs; adds a comparison when a baseline is present."""
    lines = ["# ROC summary", ""]
    curves = {}
    for name, run in runs.items():
        n_d, n_n = len(run.min_p(DISCOVERY)), len(run.min_p(NO_DISCOVERY))
        lines += [f"## {name} ({run.spec_source})", "",
                  f"- discovery pairs: {n_d}; no-discovery pairs: {n_n}; excluded: {len(run.excluded)}", ""]
        lines += ["| alpha | tpr | fpr |", "|---:|---:|---:|"]
        for a in CALIBRATION_ALPHAS:
            tpr, fpr = rates(run, a)
            show = lambda v: "n/a" if v is None else f"{v:.3f}"
            lines.append(f"| {a:g} | {show(tpr)} | {show(fpr)} |")
        lines.append("")
        if n_d and n_n:
            curves[name] = roc(run)
    if len(curves) == 2:
        (na, ca), (nb, cb) = curves.items()
        lines += ["## Comparison", "", dominance(ca, cb).describe(na, nb), ""]
    return "\n".join(lines)
