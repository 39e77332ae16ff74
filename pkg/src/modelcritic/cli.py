"""Command-line front end.

Commands
--------
check    test statistics against model replicates and write a report
propose  write a batch of proposed statistics for a dataset
bench    generate a labelled benchmark suite and evaluate it
roc      turn calibration runs into ROC and FPR-calibration tables
report   re-render a structured report (for example as Markdown)
radon    run the self-contained radon regression scenario

Exit status is 0 when a command ran, 2 on an input or configuration error and
3 when ``check --fail-on-discrepancy`` finds a discrepancy. Settings resolve
as command-line flags, then the ``--config`` JSON file, then built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .benchmarks import RADON_METADATA, SuiteConfig, generate_suite, standard_suite, radon_scenario
from .calibration import (
    CalibrationRun,
    calibration_csv,
    evaluate_suite,
    fpr_calibration,
    roc,
    summary_markdown,
)
from .checks import CheckReport, SignificanceConfig, run_check
from .critique import build_report, parse_report, render_report
from .data import (
    DatasetMetadata,
    ModelRepresentation,
    load_dataset,
    load_metadata,
    load_samples,
    write_dataset,
    write_samples,
)
from .errors import CriticError
from .proposer import (
    EndpointConfig,
    ProposalBatch,
    ProposalRequest,
    parse_proposals,
    propose_catalog,
    propose_external,
    validate_batch,
)

logger = logging.getLogger("modelcritic")

EXIT_OK, EXIT_ERROR, EXIT_DISCREPANCY = 0, 2, 3

DEFAULTS: dict[str, Any] = {
    "alpha": 0.05,
    "tail": "upper",
    "correction": "bonferroni",
    "seed": 0,
    "n_proposals": 24,
    "backend": "catalog",
    "format": "structured",
    "endpoint": None,
    "metadata": None,
    "model_program": None,
    "target": None,
    "specs": None,
    "plot_data": None,
    "n": None,
    "m": None,
    "copies": None,
    "families": None,
    "suite": None,
    "out": None,
    "fail_on_discrepancy": False,
    "write_pairs": False,
    "include_floor": False,
}

COMMAND_DEFAULTS = {
    "radon": {"alpha": 0.01, "n_proposals": 20, "format": "markdown"},
}


class UsageError(Exception):
    pass


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=f".{p.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, p)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _emit(text: str, out) -> None:
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        write_atomic(out, text)


def _ext(fmt: str) -> str:
    return "md" if fmt == "markdown" else "json"


# --- settings ----------------------------------------------------------------

def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Merge flags over the config file over defaults."""
    config: dict[str, Any] = {}
    if args.config:
        p = Path(args.config)
        if not p.exists():
            raise UsageError(f"config file not found: {p}")
        try:
            config = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {p} is not valid JSON: {exc}") from None
        if not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
        config = {k.replace("-", "_"): v for k, v in config.items()}
        for secret in ("api_key", "token", "credential"):
            if secret in config:
                raise UsageError("credentials must come from the environment, not the config file")
    merged = {**DEFAULTS, **COMMAND_DEFAULTS.get(args.command, {})}
    merged.update({k: v for k, v in config.items() if k in DEFAULTS})
    merged.update({k: v for k, v in vars(args).items() if v is not None})
    ns = argparse.Namespace(**merged)
    if not 0 < float(ns.alpha) < 1:
        raise UsageError(f"--alpha must lie in (0, 1), got {ns.alpha}")
    return ns


def _sig(ns) -> SignificanceConfig:
    return SignificanceConfig(float(ns.alpha), ns.tail, ns.correction)


def _load_specs_file(path) -> list:
    """Specs from a JSON list (text or AST records) or one DSL expression per line."""
    p = Path(path)
    if not p.exists():
        raise UsageError(f"specs file not found: {p}")
    text = p.read_text(encoding="utf-8")
    if p.suffix.lower() == ".json":
        items = json.loads(text)
        if isinstance(items, dict):
            items = items.get("accepted") or items.get("proposals")
        if not isinstance(items, list):
            raise UsageError("specs JSON must be a list (or a batch record)")
        return items
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def _proposals(ns, d, meta: DatasetMetadata) -> ProposalBatch:
    if ns.specs:
        batch = parse_proposals(_load_specs_file(ns.specs), d)
    elif ns.backend == "catalog":
        batch = propose_catalog(d.schema(), int(ns.n_proposals), int(ns.seed))
    elif ns.backend == "external":
        if not ns.endpoint:
            raise UsageError("--backend external needs --endpoint CONFIG.json")
        program = Path(ns.model_program).read_text(encoding="utf-8") if ns.model_program else ""
        req = ProposalRequest(meta, d.schema(), ModelRepresentation(program), int(ns.n_proposals))
        batch = propose_external(req, EndpointConfig.from_file(ns.endpoint))
    else:
        raise UsageError(f"unknown backend {ns.backend!r}")
    return validate_batch(batch, d)


def _meta(ns, d) -> DatasetMetadata:
    if not ns.metadata:
        return DatasetMetadata()
    meta = load_metadata(ns.metadata)
    meta.validate_against(d)
    return meta


# --- commands ----------------------------------------------------------------

def _plot_rows(check: CheckReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["spec", "kind", "index", "value"])
    for r in check.ordered_results():
        w.writerow([r.spec.text, "observed", "", repr(float(r.observed))])
        for i, v in enumerate(r.null.values):
            w.writerow([r.spec.text, "null", i, repr(float(v))])
    return buf.getvalue()


def cmd_check(ns) -> int:
    d = load_dataset(ns.data, ns.target)
    s = load_samples(ns.samples)
    meta = _meta(ns, d)
    batch = _proposals(ns, d, meta)
    check = run_check(d, s, batch.accepted, _sig(ns), batch.rejected, batch.family_size)
    report = build_report(check, meta, d.target)
    _emit(render_report(report, ns.format), ns.out)
    if ns.plot_data:
        write_atomic(ns.plot_data, _plot_rows(check))
    n_sig = len(report.significant)
    logger.info("%d of %d statistics significant (family %d)", n_sig, len(check.results), check.family_size)
    if ns.fail_on_discrepancy and check.discrepant:
        return EXIT_DISCREPANCY
    return EXIT_OK


def cmd_propose(ns) -> int:
    d = load_dataset(ns.data, ns.target)
    batch = _proposals(ns, d, _meta(ns, d))
    _emit(dump_json(batch.to_record()), ns.out)
    return EXIT_OK


def _suite(ns) -> SuiteConfig:
    if ns.suite:
        p = Path(ns.suite)
        if not p.exists():
            raise UsageError(f"suite file not found: {p}")
        suite = SuiteConfig.from_record(json.loads(p.read_text(encoding="utf-8")))
    else:
        suite = standard_suite()
    n = int(ns.n) if ns.n else suite.n
    m = int(ns.m) if ns.m else suite.m
    copies = int(ns.copies) if ns.copies else suite.copies
    suite = SuiteConfig(suite.entries, n, m, copies)
    if ns.families:
        names = ns.families if isinstance(ns.families, list) else str(ns.families).split(",")
        try:
            suite = suite.select([x.strip() for x in names if x.strip()])
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from None
    return suite


def cmd_bench(ns) -> int:
    out = Path(ns.out or "bench_out")
    suite = _suite(ns)
    pairs = generate_suite(suite, int(ns.seed))
    manifest = []
    for pair in pairs:
        dpath = spath = None
        if ns.write_pairs:
            stem = pair.pair_id.replace("/", "_")
            dpath, spath = out / "pairs" / f"{stem}_data.json", out / "pairs" / f"{stem}_samples.json"
            dpath.parent.mkdir(parents=True, exist_ok=True)
            write_dataset(pair.dataset, dpath)
            write_samples(pair.samples, spath)
            dpath, spath = dpath.relative_to(out), spath.relative_to(out)
        manifest.append(pair.manifest_entry(dpath, spath))
    cfg = _sig(ns)
    runs = {
        "catalog": evaluate_suite(pairs, "catalog", cfg, int(ns.n_proposals), int(ns.seed)),
        "baseline": evaluate_suite(pairs, "baseline", cfg),
    }
    write_atomic(out / "manifest.json", dump_json({"seed": int(ns.seed), "suite": suite.to_record(),
                                                   "pairs": manifest}))
    for name, run in runs.items():
        write_atomic(out / f"run_{name}.json", run.dumps())
    logger.info("evaluated %d pairs into %s", len(pairs), out)
    return EXIT_OK


def cmd_roc(ns) -> int:
    out = Path(ns.out or "roc_out")
    runs = {}
    for path in ns.runs:
        p = Path(path)
        if not p.exists():
            raise UsageError(f"run file not found: {p}")
        try:
            run = CalibrationRun.loads(p.read_text(encoding="utf-8"))
        except (ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"malformed run file {p}: {exc}") from None
        name = p.stem[4:] if p.stem.startswith("run_") else p.stem
        runs[name] = run
    m = int(ns.m) if ns.m else None
    for name, run in runs.items():
        try:
            write_atomic(out / f"roc_{name}.csv", roc(run).to_csv())
        except ValueError as exc:
            logger.warning("no ROC for %s: %s", name, exc)
        try:
            write_atomic(out / f"calibration_{name}.csv", calibration_csv(fpr_calibration(run, m=m)))
        except ValueError as exc:
            logger.warning("no FPR calibration for %s: %s", name, exc)
    write_atomic(out / "roc_summary.md", summary_markdown(runs))
    return EXIT_OK


def cmd_report(ns) -> int:
    p = Path(ns.input)
    if not p.exists():
        raise UsageError(f"report file not found: {p}")
    try:
        report = parse_report(p.read_text(encoding="utf-8"))
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"malformed report {p}: {exc}") from None
    _emit(render_report(report, ns.format), ns.out)
    return EXIT_OK


def cmd_radon(ns) -> int:
    out = Path(ns.out or "radon_out")
    variants = [True] if ns.include_floor else [False, True]
    for include_floor in variants:
        d, s, model = radon_scenario(int(ns.seed), include_floor)
        batch = validate_batch(propose_catalog(d.schema(), int(ns.n_proposals), int(ns.seed)), d)
        check = run_check(d, s, batch.accepted, _sig(ns), batch.rejected, batch.family_size)
        report = build_report(check, RADON_METADATA, d.target)
        tag = "control" if include_floor else "lesioned"
        write_atomic(out / f"radon_{tag}.{_ext(ns.format)}", render_report(report, ns.format))
        write_atomic(out / f"radon_{tag}_model.stan", model.program_text)
        logger.info("%s: %d significant", tag, len(report.significant))
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "propose": cmd_propose,
    "bench": cmd_bench,
    "roc": cmd_roc,
    "report": cmd_report,
    "radon": cmd_radon,
}


# --- parser ------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, *, test: bool = True, proposals: bool = True) -> None:
    # defaults stay None so the config file can fill them in
    p.add_argument("--config", help="JSON file with settings (flags take precedence)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output file or directory")
    p.add_argument("--format", choices=("structured", "markdown"))
    if test:
        p.add_argument("--alpha", type=float)
        p.add_argument("--tail", choices=("upper", "lower", "two-sided", "two_sided"))
        p.add_argument("--correction", choices=("bonferroni", "none"))
    if proposals:
        p.add_argument("--n-proposals", dest="n_proposals", type=int)
        p.add_argument("--backend", choices=("catalog", "external"))
        p.add_argument("--endpoint", help="JSON endpoint config for --backend external")


def _data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="dataset file (CSV or JSON)")
    p.add_argument("--target", help="target column (required for CSV)")
    p.add_argument("--metadata", help="metadata JSON")
    p.add_argument("--specs", help="statistics: JSON list or one DSL expression per line")
    p.add_argument("--model-program", dest="model_program", help="model source text shown to the proposer")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modelcritic", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="test statistics against model replicates")
    _common(p)
    _data_args(p)
    p.add_argument("--samples", required=True, help="replicates (JSON or wide CSV)")
    p.add_argument("--fail-on-discrepancy", dest="fail_on_discrepancy", action="store_true")
    p.add_argument("--plot-data", dest="plot_data", help="CSV of observed and null values per statistic")

    p = sub.add_parser("propose", help="propose statistics for a dataset")
    _common(p, test=False)
    _data_args(p)

    p = sub.add_parser("bench", help="generate and evaluate a benchmark suite")
    _common(p)
    p.add_argument("--suite", help="suite JSON (default: the six built-in configurations)")
    p.add_argument("--families", help="comma-separated configuration names to keep")
    p.add_argument("--n", type=int, help="rows per dataset")
    p.add_argument("--m", type=int, help="replicates per pair")
    p.add_argument("--copies", type=int, help="pairs per configuration")
    p.add_argument("--write-pairs", dest="write_pairs", action="store_true",
                   help="also write every dataset and sample set")

    p = sub.add_parser("roc", help="ROC and FPR-calibration tables from run files")
    _common(p, test=False, proposals=False)
    p.add_argument("runs", nargs="+", help="run_*.json files written by bench")
    p.add_argument("--m", type=int, help="replicates per pair, widens the calibration band by 1/m")

    p = sub.add_parser("report", help="re-render a structured report")
    _common(p, test=False, proposals=False)
    p.add_argument("input", help="structured report JSON")

    p = sub.add_parser("radon", help="run the radon regression scenario")
    _common(p)
    p.add_argument("--include-floor", dest="include_floor", action="store_true",
                   help="only the well-specified control model")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    # store_true flags default to False; drop them so the config file can set them
    for flag in ("fail_on_discrepancy", "write_pairs", "include_floor"):
        if getattr(args, flag, None) is False:
            setattr(args, flag, None)
    try:
        ns = resolve(args)
        for flag in ("fail_on_discrepancy", "write_pairs", "include_floor"):
            setattr(ns, flag, bool(getattr(ns, flag, False)))
        return COMMANDS[ns.command](ns)
    except (UsageError, CriticError, OSError, ValueError, KeyError) as exc:
        print(f"modelcritic {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
