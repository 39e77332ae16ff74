import json
import re

import numpy as np
import pytest

from modelcritic.benchmarks import RADON_METADATA, radon_scenario
from modelcritic.checks import NullDistribution, SignificanceConfig, TestResult, run_check
from modelcritic.critique import (
    EXTERNAL,
    NONE,
    SIGNIFICANT,
    SUGGESTIVE,
    TEMPLATE,
    DiscrepancyReport,
    build_report,
    fmt,
    parse_report,
    render_critique,
    render_report,
    severity,
)
from modelcritic.data import DatasetMetadata
from modelcritic.dsl import parse_spec


def _result(text, observed, null, family_size=20):
    null = NullDistribution(np.asarray(null, float), text)
    p = float(np.mean(null.values >= observed))
    return TestResult(parse_spec(text), observed, null, p, min(1.0, family_size * p), "upper", family_size, null.m)


def test_severity_bands():
    assert severity(0.01, 0.01) == SIGNIFICANT
    assert severity(0.011, 0.01) == SUGGESTIVE
    assert severity(0.15, 0.05) == SUGGESTIVE
    assert severity(0.1501, 0.05) == NONE


def test_floor_variability_critique():
    rng = np.random.default_rng(0)
    r = _result("std(where floor == 0) - std(where floor == 1)", 0.5, rng.normal(0, 0.05, 500))
    c = render_critique(r, RADON_METADATA, SignificanceConfig(alpha=0.01))
    assert c.severity == SIGNIFICANT and c.provenance == TEMPLATE
    assert "floor" in c.text and "variability" in c.text
    assert "standard deviation" in c.text
    assert "above the model's entire null range" in c.text
    assert "< 0.002" in c.text


def test_no_evidence_text_and_determinism():
    r = _result("mean()", -5.0, np.arange(10.0))
    a = render_critique(r, DatasetMetadata(), SignificanceConfig())
    b = render_critique(r, DatasetMetadata(), SignificanceConfig())
    assert a.p_adjusted == 1.0 and a.severity == NONE
    assert "no evidence of a discrepancy" in a.text
    assert a.text == b.text


def test_numbers_in_text_are_formatted_fields():
    rng = np.random.default_rng(1)
    r = _result("variance(where uppm in quantile_bin(3, 2))", 1.23456789, rng.normal(1.0, 0.2, 500))
    c = render_critique(r, RADON_METADATA, SignificanceConfig())
    allowed = {fmt(r.observed), fmt(r.p_adjusted), fmt(r.p_raw), fmt(1 / r.m), str(r.m), str(r.family_size)}
    allowed |= {fmt(v) for v in r.null_summary.values()}
    # numerals that belong to the spec text itself are exempt
    body = c.text.replace(r.spec.text, "")
    for num in re.findall(r"(?<![\w.])-?\d+(?:\.\d+)?(?:e[-+]?\d+)?", body):
        assert num in allowed or num in ("0", "1", "2", "3", "95"), num


def test_enhancer_marks_provenance():
    r = _result("mean()", 100.0, np.arange(10.0), 1)
    c = render_critique(r, None, SignificanceConfig(), enhancer=lambda res, text: "Rewritten.")
    assert c.provenance == EXTERNAL and c.text == "Rewritten." and c.template_text.startswith("Statistic")

    def broken(res, text):
        raise RuntimeError("service down")

    c = render_critique(r, None, SignificanceConfig(), enhancer=broken)
    assert c.provenance == TEMPLATE


@pytest.fixture(scope="module")
def radon_check():
    d, s, _ = radon_scenario(0, include_floor=False)
    specs = ["std(where floor == 0) - std(where floor == 1)", "mean(where floor == 1) - mean(where floor == 0)",
             "mean()", "mean(where floor == 9)"]
    return run_check(d, s, specs, SignificanceConfig(alpha=0.01))


def test_report_sorted_and_round_trips(radon_check):
    rep = build_report(radon_check, RADON_METADATA, "radon")
    ps = [(c.p_adjusted, c.spec.text) for c in rep.critiques]
    assert ps == sorted(ps)
    text = render_report(rep, "structured")
    back = parse_report(text)
    assert render_report(back, "structured") == text
    rec = json.loads(text)
    assert rec["report_schema_version"] == 1
    assert rec["family_size"] == 4 and len(rec["rejected"]) == 1


def test_markdown_layout(radon_check):
    md = render_report(build_report(radon_check, RADON_METADATA, "radon"), "markdown")
    assert "| rank | statistic |" in md
    assert "## Significant discrepancies" in md
    assert "Null distribution:" in md
    assert "## Rejected proposals" in md


def test_markdown_without_findings():
    rep = DiscrepancyReport("d", "m", 1, 0.05, "upper", 10, [], [("mean(", "syntax")])
    assert "No significant discrepancies" in render_report(rep, "markdown")


def test_report_counts_checked():
    r = _result("mean()", 0.0, [1.0, 2.0], 1)
    c = render_critique(r)
    with pytest.raises(ValueError):
        DiscrepancyReport("d", "m", 1, 0.05, "upper", 2, [c, c])
