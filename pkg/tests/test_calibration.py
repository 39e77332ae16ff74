import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modelcritic.benchmarks import DISCOVERY, NO_DISCOVERY, SuiteConfig, SuiteEntry, generate_suite
from modelcritic.calibration import (
    BASELINE,
    CalibrationRun,
    calibration_csv,
    default_alpha_grid,
    dominance,
    evaluate_suite,
    fpr_band,
    fpr_calibration,
    rates,
    roc,
    summary_markdown,
    wilson_interval,
)
from modelcritic.checks import SignificanceConfig, decide, run_check
from modelcritic.families import GAUSSIAN, POISSON, ModelFamily
from modelcritic.proposer import propose_catalog, validate_batch


def _run(disc, nodisc, **kw):
    dec = {f"d/{i}": (DISCOVERY, p) for i, p in enumerate(disc)}
    dec.update({f"n/{i}": (NO_DISCOVERY, p) for i, p in enumerate(nodisc)})
    return CalibrationRun(dec, **kw)


def test_default_grid():
    g = default_alpha_grid()
    assert len(g) == 50 and g[0] == pytest.approx(0.001) and g[-1] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        _run([0.1], [0.1], alpha_grid=np.array([0.1, 0.05]))


def test_rates_examples():
    run = _run([0.001, 0.2], [0.3, 0.5])
    assert rates(run, 0.05) == (0.5, 0.0)
    assert rates(_run([], [0.3]), 0.05) == (None, 0.0)


def test_roc_perfect_separation():
    curve = roc(_run([0.0, 0.0005], [0.9, 0.7]))
    assert (0.0, 1.0) in [(f, t) for _, f, t in curve.points]
    with pytest.raises(ValueError):
        roc(_run([0.1], []))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=20), st.lists(st.floats(0, 1), min_size=1, max_size=20))
def test_roc_monotone(d, n):
    curve = roc(_run(d, n))
    assert np.all(np.diff(curve.fpr()) >= 0) and np.all(np.diff(curve.tpr()) >= 0)
    assert np.all((curve.fpr() >= 0) & (curve.fpr() <= 1))


def test_roc_diagonal_for_identical_labels():
    rng = np.random.default_rng(0)
    run = _run(rng.uniform(size=2000), rng.uniform(size=2000))
    curve = roc(run)
    assert np.max(np.abs(curve.tpr() - curve.fpr())) < 0.05


def test_wilson():
    lo, hi = wilson_interval(0, 20, 0.95)
    assert lo == 0.0 and hi == pytest.approx(0.16112515805, abs=1e-9)
    lo, hi = wilson_interval(10, 20)
    assert 0.5 - lo == pytest.approx(hi - 0.5, abs=1e-15)
    assert wilson_interval(20, 20)[1] == 1.0
    with pytest.raises(ValueError):
        wilson_interval(3, 2)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 500).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))))
def test_wilson_contains_point(sn):
    s, n = sn
    lo, hi = wilson_interval(s, n)
    assert 0 <= lo <= s / n <= hi <= 1


def test_fpr_band_widened_by_granularity():
    lo, hi = fpr_band(0.05, 200, 500)
    wlo, whi = fpr_band(0.05, 200, 10**12)
    assert lo == pytest.approx(wlo - 0.002) and hi == pytest.approx(whi + 0.002)


@pytest.fixture(scope="module")
def mixed_suite():
    cfg = SuiteConfig(
        (SuiteEntry("pois_ctl", ModelFamily(POISSON), ModelFamily(POISSON)),
         SuiteEntry("gauss_vs_pois", ModelFamily(POISSON), ModelFamily(GAUSSIAN))),
        n=60, m=100, copies=4)
    return generate_suite(cfg, 0)


def test_evaluate_suite_and_sweep_consistency(mixed_suite):
    cfg = SignificanceConfig()
    run = evaluate_suite(mixed_suite, "catalog", cfg, n_proposals=8)
    assert len(run.decisions) == 8 and not run.excluded
    for pair in mixed_suite[:3]:
        b = validate_batch(propose_catalog(pair.dataset.schema(), 8, 0), pair.dataset)
        for alpha in (0.01, 0.2):
            rep = run_check(pair.dataset, pair.samples, b.accepted, SignificanceConfig(alpha=alpha), b.rejected,
                            b.family_size)
            assert run.decision(pair.pair_id, alpha) == decide(rep.results, rep.cfg).discrepant
    base = evaluate_suite(mixed_suite, "baseline", cfg)
    assert base.spec_source == BASELINE and set(base.family_sizes.values()) == {2}
    back = CalibrationRun.loads(run.dumps())
    assert back.dumps() == run.dumps()


def test_empty_suite_rejected():
    with pytest.raises(ValueError):
        evaluate_suite([], "catalog")


def test_calibration_and_summary(mixed_suite):
    run = evaluate_suite(mixed_suite, "catalog", n_proposals=8)
    rows = fpr_calibration(run, m=100)
    assert [r.alpha for r in rows] == [0.01, 0.05, 0.1, 0.2]
    assert calibration_csv(rows).splitlines()[0] == "alpha,fpr,band_lo,band_hi,n_no_discovery,within"
    base = evaluate_suite(mixed_suite, "baseline")
    md = summary_markdown({"catalog": run, "baseline": base})
    assert "## Comparison" in md
    assert "## Comparison" not in summary_markdown({"catalog": run})
    d = dominance(roc(run), roc(run))
    assert d.dominates and not d.strict_somewhere
