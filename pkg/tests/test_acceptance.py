"""Acceptance criteria 1-9.

Each test prints one ``criterion N: PASS|FAIL`` line through the terminal
reporter, so the lines show up in plain ``pytest`` output. Tolerances and
sizes are the ones fixed for acceptance; derived thresholds were set from
oracle simulations before these tests were written, and every suite uses
master seed 0.
"""

import os
import socket
import time

import numpy as np
import pytest

from modelcritic.benchmarks import generate_suite, standard_suite, radon_scenario
from modelcritic.calibration import dominance, evaluate_suite, fpr_band, rates, roc
from modelcritic.checks import SignificanceConfig, bonferroni_adjust, empirical_pvalue, run_check
from modelcritic.cli import main
from modelcritic.data import Dataset
from modelcritic.dsl import AGGREGATES, Agg, StatisticSpec, parse_spec, print_spec
from modelcritic.proposer import propose_catalog, validate_batch
from modelcritic.statistic import evaluate
from spec_corpus import generate_corpus
from test_dsl import PARAMS, _oracle

SEED = 0
DISCOVERY_CONFIGS = ("t_vs_gaussian", "negbin_vs_poisson", "glm_vs_logistic")
CREDENTIAL_ENV = "MODELCRITIC_API_KEY"

_connects: list = []


@pytest.fixture(scope="module", autouse=True)
def offline():
    """Refuse every outbound connection and hide any credential for the whole module."""
    real_connect = socket.socket.connect
    saved = os.environ.pop(CREDENTIAL_ENV, None)

    def refuse(self, address):
        _connects.append(address)
        raise OSError("network disabled during acceptance run")

    socket.socket.connect = refuse
    yield
    socket.socket.connect = real_connect
    if saved is not None:
        os.environ[CREDENTIAL_ENV] = saved


@pytest.fixture
def verdict(request):
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def emit(n, ok, detail):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        else:
            print(line)
        return ok

    return emit


_timings: dict = {}


@pytest.fixture(scope="module")
def standard_pairs():
    start = time.perf_counter()
    pairs = generate_suite(standard_suite(n=200, m=500, copies=20), SEED)
    _timings["standard_suite"] = time.perf_counter() - start
    return pairs


def test_criterion_1_pvalue_exactness(verdict):
    rng = np.random.default_rng(SEED)
    start = time.perf_counter()
    mismatches = 0
    for case in range(1000):
        m = int(rng.integers(1, 600))
        # small integer grid forces plenty of ties
        null = rng.integers(-20, 21, m).astype(float) if case % 2 else rng.normal(size=m)
        obs = float(rng.choice(null)) if case % 3 == 0 else float(rng.normal() * 10)
        tail = ("upper", "lower", "two_sided")[case % 3]
        up = sum(1 for v in null.tolist() if v >= obs) / m
        lo = sum(1 for v in null.tolist() if v <= obs) / m
        want = {"upper": up, "lower": lo, "two_sided": min(1.0, 2 * min(up, lo))}[tail]
        mismatches += empirical_pvalue(null, obs, tail) != want
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 5
    verdict(1, ok, f"{mismatches} mismatches in 1000 cases, {elapsed:.2f}s (limit 5s)")
    assert ok


def test_criterion_2_fpr_calibration(verdict):
    start = time.perf_counter()
    suite = standard_suite(n=200, m=500, copies=200).select(["gaussian_control"])
    pairs = generate_suite(suite, SEED)
    run = evaluate_suite(pairs, [parse_spec("mean()")], SignificanceConfig())
    elapsed = time.perf_counter() - start
    parts, ok = [], elapsed < 180
    for alpha in (0.01, 0.05, 0.1, 0.2):
        _, fpr = rates(run, alpha)
        lo, hi = fpr_band(alpha, len(pairs), 500)
        inside = lo <= fpr <= hi
        ok &= inside
        parts.append(f"a={alpha}: fpr={fpr:.3f} in [{lo:.4f}, {hi:.4f}]{'' if inside else ' OUTSIDE'}")
    verdict(2, ok, f"{len(pairs)} pairs, {'; '.join(parts)}; {elapsed:.1f}s (limit 180s)")
    assert ok


def test_criterion_3_detection_power(standard_pairs, verdict):
    start = time.perf_counter()
    pairs = [p for p in standard_pairs if p.config in DISCOVERY_CONFIGS]
    cfg = SignificanceConfig(alpha=0.05)
    cat = evaluate_suite(pairs, "catalog", cfg, n_proposals=24, seed=SEED)
    base = evaluate_suite(pairs, "baseline", cfg)
    tpr_cat, _ = rates(cat, 0.05)
    tpr_base, _ = rates(base, 0.05)
    per = {}
    for name in DISCOVERY_CONFIGS:
        ids = [p.pair_id for p in pairs if p.config == name]
        per[name] = tuple(sum(r.decisions[i][1] <= 0.05 for i in ids) / len(ids) for r in (cat, base))
    elapsed = time.perf_counter() - start + _timings.get("standard_suite", 0.0)
    t_cat, t_base = per["t_vs_gaussian"]
    ok = (len(pairs) == 60 and not cat.excluded and tpr_cat >= tpr_base and t_cat > t_base and t_cat >= 0.8
          and elapsed < 600)
    detail = ", ".join(f"{k} {c:.2f} vs {b:.2f}" for k, (c, b) in per.items())
    verdict(3, ok, f"suite TPR catalog {tpr_cat:.3f} vs baseline {tpr_base:.3f} ({detail}); "
                   f"t3 threshold 0.8; {elapsed:.1f}s including generation (limit 600s)")
    assert ok


def test_roc_dominance_standard_suite(standard_pairs, verdict):
    # supplementary to criterion 3: the whole 120-pair suite, catalog against baseline
    cat = evaluate_suite(standard_pairs, "catalog", n_proposals=24, seed=SEED)
    base = evaluate_suite(standard_pairs, "baseline")
    dom = dominance(roc(cat), roc(base))
    ok = len(cat.decisions) == 120 and dom.dominates
    verdict("3 (ROC)", ok, f"{len(cat.decisions)} pairs; {dom.describe()}")
    assert ok


def test_criterion_4_radon(verdict):
    start = time.perf_counter()
    cfg = SignificanceConfig(alpha=0.01)
    lesioned_hits = control_clean = 0
    for seed in range(20):
        for include_floor in (False, True):
            d, s, _ = radon_scenario(seed, include_floor)
            batch = validate_batch(propose_catalog(d.schema(), 20, SEED), d)
            rep = run_check(d, s, batch.accepted, cfg, batch.rejected, batch.family_size)
            sig = rep.decision.significant
            if include_floor:
                control_clean += not sig
            else:
                lesioned_hits += any("floor" in r.spec.columns() for r in sig)
    elapsed = time.perf_counter() - start
    ok = lesioned_hits >= 18 and control_clean >= 19 and elapsed < 120
    verdict(4, ok, f"lesioned floor-sliced hit {lesioned_hits}/20 (need 18), control clean "
                   f"{control_clean}/20 (need 19), {elapsed:.1f}s (limit 120s)")
    assert ok


def test_criterion_5_overdispersion(verdict):
    start = time.perf_counter()
    pairs = generate_suite(standard_suite(n=200, m=500, copies=20).select(["negbin_vs_poisson"]), SEED)
    run = evaluate_suite(pairs, [parse_spec("dispersion_ratio()")], SignificanceConfig(alpha=0.05))
    hits = sum(p <= 0.05 for _, p in run.decisions.values())
    elapsed = time.perf_counter() - start
    ok = len(run.decisions) == 20 and hits >= 16 and elapsed < 60
    verdict(5, ok, f"dispersion_ratio adjusted p <= 0.05 in {hits}/20 (need 16), {elapsed:.1f}s (limit 60s)")
    assert ok


def test_criterion_6_bonferroni(verdict):
    rng = np.random.default_rng(SEED)
    failures = 0
    for _ in range(10_000):
        k = int(rng.integers(1, 30))
        n = k + int(rng.integers(0, 30))
        p = rng.uniform(size=k)
        p[rng.uniform(size=k) < 0.1] = 0.0
        adj = bonferroni_adjust(p, n)
        exact = all(a == min(1.0, n * q) for a, q in zip(adj.tolist(), p.tolist()))
        order = np.argsort(p, kind="stable")
        monotone = bool(np.all(np.diff(adj[order]) >= 0))
        failures += not (exact and monotone and bool(np.all(adj >= p)))
    ok = failures == 0
    verdict(6, ok, f"{failures} failures in 10000 random cases")
    assert ok


def test_criterion_7_dsl(verdict):
    corpus = generate_corpus(200, seed=SEED)
    rt_fail = sum(parse_spec(print_spec(s)) != s or print_spec(parse_spec(print_spec(s))) != print_spec(s)
                  for s in corpus)
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for kind in sorted(AGGREGATES):
        params = PARAMS.get(kind, ())
        for _ in range(50):
            n = int(rng.integers(2, 101))
            y = rng.normal(rng.uniform(-2, 2), rng.uniform(0.1, 5), n)
            d = Dataset.from_columns("t", {"y": y.tolist()}, "y")
            got = evaluate(StatisticSpec(Agg(kind, params)), d)
            want = _oracle(kind, params, y)
            err = abs(got - want) / max(abs(want), 1e-300) if want != 0 else abs(got)
            worst = max(worst, err)
    ok = rt_fail == 0 and worst <= 1e-12
    verdict(7, ok, f"round-trip failures {rt_fail}/200, worst aggregator relative error {worst:.2e} (limit 1e-12)")
    assert ok


def test_criterion_8_determinism(tmp_path, verdict):
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["radon", "--seed", "0", "--format", "structured", "--out", str(out / "radon")]) == 0
        assert main(["bench", "--seed", "0", "--families", "t_vs_gaussian,gaussian_control", "--copies", "5",
                     "--out", str(out / "bench")]) == 0
        outputs.append({p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()})
    same = outputs[0] == outputs[1]
    ok = same and len(outputs[0]) >= 7
    verdict(8, ok, f"{len(outputs[0])} files compared across two runs, byte-identical: {same}")
    assert ok


def test_criterion_9_offline(verdict):
    # runs last in this module; the autouse fixture has refused sockets throughout
    ok = not _connects and CREDENTIAL_ENV not in os.environ
    verdict(9, ok, f"backend=catalog, outbound connection attempts: {len(_connects)}, credential unset")
    assert ok
