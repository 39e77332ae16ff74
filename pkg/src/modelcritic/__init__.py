"""Model criticism with test statistics over posterior-predictive replicates.

Typical use::

    from modelcritic import load_dataset, load_samples, propose_catalog, run_check

    d = load_dataset("data.csv", target="y")
    s = load_samples("replicates.json")
    batch = validate_batch(propose_catalog(d.schema(), 24), d)
    report = run_check(d, s, batch.accepted, SignificanceConfig(alpha=0.05),
                       batch.rejected, batch.family_size)
"""

__version__ = "0.1.0"

from .benchmarks import (
    DISCOVERY,
    NO_DISCOVERY,
    BenchmarkPair,
    SuiteConfig,
    SuiteEntry,
    generate_suite,
    standard_suite,
    radon_scenario,
)
from .calibration import CalibrationRun, RocCurve, evaluate_suite, rates, roc, wilson_interval
from .checks import (
    CheckReport,
    DiscrepancyDecision,
    NullDistribution,
    SignificanceConfig,
    TestResult,
    bonferroni_adjust,
    decide,
    empirical_pvalue,
    null_distribution,
    run_check,
)
from .critique import Critique, DiscrepancyReport, build_report, render_critique, render_report
from .data import (
    Column,
    Dataset,
    DatasetMetadata,
    ModelRepresentation,
    ModelSampleSet,
    load_dataset,
    load_metadata,
    load_samples,
)
from .dsl import StatisticSpec, parse_spec, print_spec
from .errors import CriticError, DataError, SpecError
from .families import ModelFamily, posterior_predictive, sample_data
from .proposer import ProposalBatch, baseline_specs, propose_catalog, propose_external, validate_batch
from .statistic import evaluate, validate_spec

__all__ = [
    "DISCOVERY",
    "NO_DISCOVERY",
    "BenchmarkPair",
    "SuiteConfig",
    "SuiteEntry",
    "generate_suite",
    "standard_suite",
    "radon_scenario",
    "CalibrationRun",
    "RocCurve",
    "evaluate_suite",
    "rates",
    "roc",
    "wilson_interval",
    "CheckReport",
    "DiscrepancyDecision",
    "NullDistribution",
    "SignificanceConfig",
    "TestResult",
    "bonferroni_adjust",
    "decide",
    "empirical_pvalue",
    "null_distribution",
    "run_check",
    "Critique",
    "DiscrepancyReport",
    "build_report",
    "render_critique",
    "render_report",
    "Column",
    "Dataset",
    "DatasetMetadata",
    "ModelRepresentation",
    "ModelSampleSet",
    "load_dataset",
    "load_metadata",
    "load_samples",
    "StatisticSpec",
    "parse_spec",
    "print_spec",
    "CriticError",
    "DataError",
    "SpecError",
    "ModelFamily",
    "posterior_predictive",
    "sample_data",
    "ProposalBatch",
    "baseline_specs",
    "propose_catalog",
    "propose_external",
    "validate_batch",
    "evaluate",
    "validate_spec",
]
