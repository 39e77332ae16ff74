import numpy as np
import pytest

from modelcritic.benchmarks import (
    DISCOVERY,
    NO_DISCOVERY,
    RADON_METADATA,
    SuiteConfig,
    SuiteEntry,
    generate_suite,
    make_pair,
    standard_suite,
    radon_scenario,
)
from modelcritic.checks import SignificanceConfig, run_check
from modelcritic.dsl import parse_spec
from modelcritic.families import GAUSSIAN, ModelFamily


def test_standard_suite_shape():
    suite = standard_suite()
    assert len(suite.entries) == 6
    labels = [e.label for e in suite.entries]
    assert labels.count(DISCOVERY) == 3 and labels.count(NO_DISCOVERY) == 3
    assert suite.copies * len(suite.entries) == 120


def test_small_suite_labels_and_determinism():
    cfg = SuiteConfig((SuiteEntry("g", ModelFamily(GAUSSIAN), ModelFamily(GAUSSIAN)),), n=20, m=10, copies=3)
    a, b = generate_suite(cfg, 4), generate_suite(cfg, 4)
    assert [p.label for p in a] == [NO_DISCOVERY] * 3
    assert [p.pair_id for p in a] == ["g/00", "g/01", "g/02"]
    for x, y in zip(a, b):
        assert x.dataset == y.dataset and x.samples == y.samples and x.seed == y.seed
    assert a[0].dataset != a[1].dataset


def test_subset_reproduces_full_suite_pairs():
    full = standard_suite(n=30, m=10, copies=2)
    sub = full.select(["poisson_control"])
    pf = [p for p in generate_suite(full, 1) if p.config == "poisson_control"]
    ps = generate_suite(sub, 1)
    assert [p.seed for p in pf] == [p.seed for p in ps]
    assert all(x.dataset == y.dataset for x, y in zip(pf, ps))
    with pytest.raises(KeyError):
        full.select(["nope"])


def test_label_is_structural():
    e = standard_suite().entries[0]
    pair = make_pair(e, 0, 0, 20, 5)
    assert pair.label == DISCOVERY
    entry = pair.manifest_entry()
    assert entry["label"] == DISCOVERY and entry["dataset_path"] is None


def test_suite_record_round_trip():
    suite = standard_suite()
    assert SuiteConfig.from_record(suite.to_record()) == suite


def test_radon_schema_and_distractors():
    d, s, model = radon_scenario(0, include_floor=False)
    assert set(d.columns) == {"floor", "uppm", "county", "soil", "radon"}
    assert d.n_rows == 500 and s.m == 500
    assert d.schema()["floor"].is_binary
    assert "beta_floor" not in model.program_text and "beta_uppm" in model.program_text
    RADON_METADATA.validate_against(d)
    rep = run_check(d, s, ['mean(where soil == "clay") - mean(where soil == "sand")'])
    assert len(rep.results) == 1


def test_radon_lesioned_floor_difference_detected():
    d, s, _ = radon_scenario(0, include_floor=False)
    cfg = SignificanceConfig(alpha=0.01, tail="two_sided")
    rep = run_check(d, s, [parse_spec("mean(where floor == 0) - mean(where floor == 1)")], cfg)
    assert rep.results[0].p_adjusted <= 0.01


def test_radon_control_model_includes_floor():
    d, s, model = radon_scenario(0, include_floor=True)
    assert "beta_floor" in model.program_text
    assert s.model_id == "radon_uppm_floor"
    rep = run_check(d, s, [parse_spec("mean(where floor == 1) - mean(where floor == 0)")])
    assert rep.results[0].p_adjusted > 0.01
    np.testing.assert_array_equal(radon_scenario(0, True)[1].replicates, s.replicates)
