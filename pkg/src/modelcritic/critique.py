"""Plain-language critiques and discrepancy reports.

The default path fills a fixed template from the test result, so the same
result always produces the same text. An optional ``enhancer`` callable (for
instance a client for a language-model service) may rewrite the text; its
output is marked with ``provenance="external_service"`` and the template text
is kept alongside as a fallback.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Callable

from .checks import CheckReport, SignificanceConfig, TestResult
from .data import DatasetMetadata
from .dsl import Agg, Compare, InSet, Predicate, StatisticSpec, parse_spec

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
SUGGESTIVE_THRESHOLD = 0.15
SIGNIFICANT, SUGGESTIVE, NONE = "significant", "suggestive", "none"
TEMPLATE, EXTERNAL = "template", "external_service"

_AGG_PHRASES = {
    "mean": "average",
    "variance": "variance (variability)",
    "std": "standard deviation (variability)",
    "min": "minimum",
    "max": "maximum",
    "range": "range (max - min)",
    "quantile": "{q:g} quantile",
    "count": "row count",
    "skewness": "skewness (asymmetry)",
    "excess_kurtosis": "excess kurtosis (tail heaviness)",
    "dispersion_ratio": "variance-to-mean ratio (dispersion)",
    "proportion_outside": "share of values outside [{lo:g}, {hi:g}]",
}

_HINTS = {
    "mean": ("a shift in location", "mean"),
    "variance": ("a difference in variability", "variability"),
    "std": ("a difference in variability", "variability"),
    "range": ("the spread of extreme values", "spread"),
    "min": ("the lower extreme of the data", "distribution"),
    "max": ("the upper extreme of the data", "distribution"),
    "quantile": ("part of the distribution's shape", "distribution"),
    "skewness": ("the asymmetry of the data", "shape"),
    "excess_kurtosis": ("the tail heaviness of the data", "tail behaviour"),
    "dispersion_ratio": ("the dispersion of the data (variance relative to mean)", "dispersion"),
    "proportion_outside": ("how often values fall outside the range", "distribution"),
    "count": ("the number of rows", "distribution"),
}


def fmt(x: float) -> str:
    """Fixed-precision number formatting used everywhere in reports (6 significant digits)."""
    return format(float(x), ".6g")


def severity(p_adjusted: float, alpha: float, suggestive: float = SUGGESTIVE_THRESHOLD) -> str:
    if p_adjusted <= alpha:
        return SIGNIFICANT
    if p_adjusted <= max(suggestive, alpha):
        return SUGGESTIVE
    return NONE


def _agg_phrase(agg: Agg) -> str:
    phrase = _AGG_PHRASES[agg.kind]
    if agg.kind == "quantile":
        return phrase.format(q=agg.params[0])
    if agg.kind == "proportion_outside":
        return phrase.format(lo=agg.params[0], hi=agg.params[1])
    return phrase


def _atom_phrase(atom, meta: DatasetMetadata) -> str:
    name = atom.column
    if isinstance(atom, Compare):
        return f"{name} {atom.op} {json.dumps(atom.value) if isinstance(atom.value, str) else atom.value}"
    if isinstance(atom, InSet):
        return f"{name} in {{{', '.join(str(v) for v in atom.values)}}}"
    pos = "lowest" if atom.index == 0 else "highest" if atom.index == atom.k_bins - 1 else f"#{atom.index + 1}"
    return f"{name} in the {pos} of {atom.k_bins} quantile bins"


def _slice_phrase(pred: Predicate | None, meta: DatasetMetadata) -> str:
    if pred is None:
        return "all rows"
    return "rows with " + " and ".join(_atom_phrase(a, meta) for a in pred.atoms)


def describe_statistic(spec: StatisticSpec, meta: DatasetMetadata, target: str = "the target") -> str:
    def go(node) -> str:
        if isinstance(node, Agg):
            if node.where is None:
                return f"the {_agg_phrase(node)} of {target}"
            return f"the {_agg_phrase(node)} of {target} over {_slice_phrase(node.where, meta)}"
        lhs, rhs = go(node.lhs), go(node.rhs)
        if node.op == "sub":
            return f"the difference between {lhs} and {rhs}"
        if node.op == "abs_sub":
            return f"the absolute difference between {lhs} and {rhs}"
        return f"the ratio of {lhs} to {rhs}"

    return go(spec.root)


def _primary_kind(spec: StatisticSpec) -> str:
    return spec.aggregates()[0].kind


def _direction(result: TestResult) -> str:
    s = result.null_summary
    lo, hi = s.get("min"), s.get("max")
    if lo is None or hi is None:
        return "compared with the model's replicates"
    if result.observed > hi:
        return "above the model's entire null range"
    if result.observed < lo:
        return "below the model's entire null range"
    med = s.get("q0.5")
    if med is not None and result.observed > med:
        return "above the median of the model's null distribution"
    if med is not None and result.observed < med:
        return "below the median of the model's null distribution"
    return "at the centre of the model's null distribution"


def _p_phrase(p: float, m: int, label: str) -> str:
    if p == 0:
        return f"{label} < {fmt(1.0 / m)} (no replicate reached the observed value; resolution 1/{m})"
    return f"{label} = {fmt(p)} (resolution 1/{m})"


@dataclass
class Critique:
    spec: StatisticSpec
    p_raw: float
    p_adjusted: float
    text: str
    provenance: str = TEMPLATE
    severity: str = NONE
    template_text: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "spec": self.spec.text,
            "p_raw": self.p_raw,
            "p_adjusted": self.p_adjusted,
            "severity": self.severity,
            "provenance": self.provenance,
            "text": self.text,
            "template_text": self.template_text or self.text,
        }

    @classmethod
    def from_dict(cls, rec) -> "Critique":
        return cls(parse_spec(rec["spec"]), float(rec["p_raw"]), float(rec["p_adjusted"]), rec["text"],
                   rec["provenance"], rec["severity"], rec.get("template_text", ""))


def template_text(result: TestResult, meta: DatasetMetadata, alpha: float, target: str = "the target") -> str:
    sev = severity(result.p_adjusted, alpha)
    what = describe_statistic(result.spec, meta, target)
    slices = result.spec.columns()
    kind = _primary_kind(result.spec)
    obs = fmt(result.observed)
    s = result.null_summary
    null_part = ""
    if "q0.025" in s and "q0.975" in s:
        null_part = f" (replicate 95% range {fmt(s['q0.025'])} to {fmt(s['q0.975'])}, median {fmt(s['q0.5'])})"
    p_adj = _p_phrase(result.p_adjusted, result.m, "adjusted p")
    p_raw = _p_phrase(result.p_raw, result.m, "raw p")
    head = f"Statistic `{result.spec.text}` measures {what}."
    body = f" The observed value {obs} lies {_direction(result)}{null_part}; {p_adj}, {p_raw}, family of {result.family_size}."
    if sev == NONE:
        tail = " There is no evidence of a discrepancy from this statistic."
    else:
        strength = "significant" if sev == SIGNIFICANT else "suggestive but not significant"
        hint, aspect = _HINTS[kind]
        tail = f" This is a {strength} discrepancy: the model misses {hint}"
        if slices:
            cols = " and ".join(slices)
            tail += f" that depends on {cols}; consider modelling {cols}-dependent {aspect} of {target}."
        else:
            tail += "."
    described = [f"{c}: {meta.describe(c)}" for c in slices if meta.describe(c)]
    if described:
        tail += " Columns: " + "; ".join(described) + "."
    return head + body + tail


def render_critique(result: TestResult, meta: DatasetMetadata | None = None,
                    cfg: SignificanceConfig | None = None, target: str = "the target",
                    enhancer: Callable[[TestResult, str], str] | None = None) -> Critique:
    meta = meta or DatasetMetadata()
    cfg = cfg or SignificanceConfig()
    text = template_text(result, meta, cfg.alpha, target)
    crit = Critique(result.spec, result.p_raw, result.p_adjusted, text, TEMPLATE,
                    severity(result.p_adjusted, cfg.alpha), text)
    if enhancer is not None:
        try:
            enhanced = enhancer(result, text)
        except Exception as exc:  # enhancer is third-party code; keep the template
            logger.warning("critique enhancer failed, keeping template text: %s", exc)
        else:
            if enhanced and enhanced.strip():
                crit.text = enhanced.strip()
                crit.provenance = EXTERNAL
    return crit


# --- reports ----------------------------------------------------------------

@dataclass
class DiscrepancyReport:
    dataset: str
    model_id: str
    family_size: int
    alpha: float
    tail: str
    m: int
    critiques: list
    rejected: list = field(default_factory=list)
    results: list = field(default_factory=list)

    def __post_init__(self):
        self.critiques = sorted(self.critiques, key=lambda c: (c.p_adjusted, c.spec.text))
        if len(self.critiques) + len(self.rejected) > self.family_size:
            raise ValueError("more critiques and rejections than the family size")

    @property
    def significant(self) -> list:
        return [c for c in self.critiques if c.severity == SIGNIFICANT]

    def to_dict(self) -> dict[str, Any]:
        return {
            "report_schema_version": REPORT_SCHEMA_VERSION,
            "dataset": self.dataset,
            "model_id": self.model_id,
            "family_size": self.family_size,
            "alpha": self.alpha,
            "tail": self.tail,
            "m": self.m,
            "n_significant": len(self.significant),
            "critiques": [c.to_dict() for c in self.critiques],
            "results": [r.to_dict() for r in sorted(self.results, key=lambda r: (r.p_adjusted, r.spec.text))],
            "rejected": [{"spec": t, "reason": r} for t, r in self.rejected],
        }

    @classmethod
    def from_dict(cls, rec) -> "DiscrepancyReport":
        if not isinstance(rec, dict):
            raise ValueError("expected a JSON object")
        if rec.get("report_schema_version") != REPORT_SCHEMA_VERSION:
            raise ValueError(f"unsupported report_schema_version {rec.get('report_schema_version')!r}")
        return cls(
            rec["dataset"], rec["model_id"], int(rec["family_size"]), float(rec["alpha"]), rec["tail"],
            int(rec["m"]),
            [Critique.from_dict(c) for c in rec["critiques"]],
            [(r["spec"], r["reason"]) for r in rec.get("rejected", [])],
            [TestResult.from_dict(r) for r in rec.get("results", [])],
        )


def build_report(check: CheckReport, meta: DatasetMetadata | None = None, target: str | None = None,
                 enhancer=None) -> DiscrepancyReport:
    crits = [render_critique(r, meta, check.cfg, target or "the target", enhancer) for r in check.results]
    return DiscrepancyReport(check.dataset, check.model_id, check.family_size, check.cfg.alpha,
                             check.cfg.tail, check.m, crits, list(check.rejected), list(check.results))


def _md_escape(text: str) -> str:
    return text.replace("|", "\\|")


def render_markdown(report: DiscrepancyReport) -> str:
    lines = [
        f"# Discrepancy report: {report.model_id} on {report.dataset}",
        "",
        f"- significance level: {fmt(report.alpha)} ({report.tail} tail, Bonferroni family of {report.family_size})",
        f"- replicates: {report.m} (p-value resolution {fmt(1.0 / report.m)})",
        f"- statistics tested: {len(report.critiques)}; rejected before testing: {len(report.rejected)}",
        "",
        "## Findings",
        "",
    ]
    if report.critiques:
        lines += ["| rank | statistic | observed | adjusted p | raw p | severity |",
                  "|---:|---|---:|---:|---:|---|"]
        by_text = {r.spec.text: r for r in report.results}
        for i, c in enumerate(report.critiques, 1):
            r = by_text.get(c.spec.text)
            obs = fmt(r.observed) if r is not None else ""
            lines.append(f"| {i} | `{_md_escape(c.spec.text)}` | {obs} | {fmt(c.p_adjusted)} | {fmt(c.p_raw)} | {c.severity} |")
        lines.append("")
    sig = report.significant
    if not sig:
        lines += ["No significant discrepancies at this level.", ""]
    else:
        lines += ["## Significant discrepancies", ""]
        by_text = {r.spec.text: r for r in report.results}
        for c in sig:
            lines += [f"### `{c.spec.text}`", "", c.text, ""]
            r = by_text.get(c.spec.text)
            if r is not None and r.null_summary:
                s = r.null_summary
                summary = ", ".join(f"{k} {fmt(v)}" for k, v in s.items())
                lines += [f"Null distribution: {summary}.", ""]
            if c.provenance != TEMPLATE:
                lines += [f"_Text provided by {c.provenance}; template text:_ {c.template_text}", ""]
    others = [c for c in report.critiques if c.severity == SUGGESTIVE]
    if others:
        lines += ["## Suggestive (not significant)", ""]
        lines += [f"- `{c.spec.text}`: adjusted p = {fmt(c.p_adjusted)}" for c in others]
        lines.append("")
    if report.rejected:
        lines += ["## Rejected proposals", ""]
        lines += [f"- `{t}`: {why}" for t, why in report.rejected]
        lines.append("")
    return "\n".join(lines)


def render_report(report: DiscrepancyReport | CheckReport, fmt_: str = "structured",
                  meta: DatasetMetadata | None = None) -> str:
    """Serialize a report as JSON (``structured``) or Markdown (``markdown``)."""
    if isinstance(report, CheckReport):
        report = build_report(report, meta)
    if fmt_ == "structured":
        return json.dumps(report.to_dict(), indent=2) + "\n"
    if fmt_ == "markdown":
        return render_markdown(report)
    raise ValueError(f"unknown report format {fmt_!r}")


def parse_report(text: str) -> DiscrepancyReport:
    return DiscrepancyReport.from_dict(json.loads(text))
