"""Binding and evaluating statistics against a dataset.

Binding resolves every slice predicate to a boolean row mask once, using only
feature columns of the observed dataset (quantile-bin edges included). The
bound statistic is then a pure function of the target vector, and can be
applied to a whole ``(m, n_rows)`` replicate matrix in one vectorized pass.

Moment conventions: population (1/n) variance and std, skewness
``m3 / m2**1.5``, excess kurtosis ``m4 / m2**2 - 3``. Quantiles use linear
interpolation between order statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import BOOLEAN, CATEGORICAL, INTEGER, REAL, Dataset, Schema
from .dsl import (
    Agg,
    Compare,
    Expr,
    InQuantileBin,
    InSet,
    Predicate,
    StatisticSpec,
    describe_predicate,
)
from .errors import (
    DegenerateMomentError,
    DegenerateValueError,
    EmptySliceError,
    PredicateTypeError,
    SpecError,
    UnknownColumnError,
)


# --- schema checks --------------------------------------------------------

def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_literal(column: str, kind: str, op: str, value) -> None:
    if kind == CATEGORICAL:
        if op not in ("==", "!=", "in"):
            raise PredicateTypeError(f"{column} is categorical; {op!r} is not defined on labels")
        if not isinstance(value, str):
            raise PredicateTypeError(f"{column} is categorical; literal {value!r} is not a label")
    elif kind == BOOLEAN:
        if op not in ("==", "!=", "in"):
            raise PredicateTypeError(f"{column} is boolean; {op!r} is not defined")
        if not (isinstance(value, bool) or value in (0, 1)) or isinstance(value, str):
            raise PredicateTypeError(f"{column} is boolean; literal {value!r} is not true/false")
    else:
        if not _is_number(value):
            raise PredicateTypeError(f"{column} is {kind}; literal {value!r} is not a number")


def check_against_schema(spec: StatisticSpec, schema) -> None:
    """Raise if ``spec`` references unknown columns or mistyped literals."""
    if isinstance(schema, Dataset):
        kinds = {k: c.kind for k, c in schema.columns.items()}
        target = schema.target
    elif isinstance(schema, Schema):
        kinds = {c.name: c.kind for c in schema.columns}
        target = schema.target
    else:
        raise TypeError(f"expected a Dataset or Schema, got {type(schema).__name__}")
    for agg in spec.aggregates():
        if agg.where is None:
            continue
        for atom in agg.where.atoms:
            if atom.column not in kinds:
                raise UnknownColumnError(atom.column)
            if atom.column == target:
                raise PredicateTypeError(f"slices may not read the target column {target!r}")
            kind = kinds[atom.column]
            if isinstance(atom, InQuantileBin):
                if kind not in (REAL, INTEGER):
                    raise PredicateTypeError(f"quantile_bin needs a numeric column, {atom.column} is {kind}")
            elif isinstance(atom, InSet):
                for v in atom.values:
                    _check_literal(atom.column, kind, "in", v)
            else:
                _check_literal(atom.column, kind, atom.op, atom.value)


# --- aggregate kernels ----------------------------------------------------
# Each kernel maps an (m, k) array to (values, bad) where ``bad`` flags rows
# whose value is undefined.

def _central(Y: np.ndarray):
    mu = Y.mean(axis=1, keepdims=True)
    return Y - mu


def _constant_rows(Y: np.ndarray) -> np.ndarray:
    return Y.max(axis=1) == Y.min(axis=1)


def _no_bad(m: int) -> np.ndarray:
    return np.zeros(m, dtype=bool)


def _k_mean(Y, params):
    return Y.mean(axis=1), _no_bad(len(Y))


def _k_variance(Y, params):
    d = _central(Y)
    return (d * d).mean(axis=1), _no_bad(len(Y))


def _k_std(Y, params):
    v, bad = _k_variance(Y, params)
    return np.sqrt(v), bad


def _k_min(Y, params):
    return Y.min(axis=1), _no_bad(len(Y))


def _k_max(Y, params):
    return Y.max(axis=1), _no_bad(len(Y))


def _k_range(Y, params):
    return Y.max(axis=1) - Y.min(axis=1), _no_bad(len(Y))


def _k_quantile(Y, params):
    return np.quantile(Y, params[0], axis=1), _no_bad(len(Y))


def _k_count(Y, params):
    return np.full(len(Y), float(Y.shape[1])), _no_bad(len(Y))


def _k_skewness(Y, params):
    bad = _constant_rows(Y)
    d = _central(Y)
    m2 = (d * d).mean(axis=1)
    m3 = (d * d * d).mean(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = m3 / m2 ** 1.5
    out[bad] = np.nan
    return out, bad


def _k_excess_kurtosis(Y, params):
    bad = _constant_rows(Y)
    d = _central(Y)
    d2 = d * d
    m2 = d2.mean(axis=1)
    m4 = (d2 * d2).mean(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = m4 / (m2 * m2) - 3.0
    out[bad] = np.nan
    return out, bad


def _k_dispersion_ratio(Y, params):
    mean = Y.mean(axis=1)
    var, _ = _k_variance(Y, params)
    zero = mean == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = var / np.where(zero, 1.0, mean)
    out[zero] = np.inf
    return out, _no_bad(len(Y))


def _k_proportion_outside(Y, params):
    lo, hi = params
    return ((Y < lo) | (Y > hi)).mean(axis=1), _no_bad(len(Y))


KERNELS = {
    "mean": _k_mean,
    "variance": _k_variance,
    "std": _k_std,
    "min": _k_min,
    "max": _k_max,
    "range": _k_range,
    "quantile": _k_quantile,
    "count": _k_count,
    "skewness": _k_skewness,
    "excess_kurtosis": _k_excess_kurtosis,
    "dispersion_ratio": _k_dispersion_ratio,
    "proportion_outside": _k_proportion_outside,
}


# --- masks ----------------------------------------------------------------

_OPS = {
    "==": np.equal,
    "!=": np.not_equal,
    "<": np.less,
    "<=": np.less_equal,
    ">": np.greater,
    ">=": np.greater_equal,
}


def quantile_bin_edges(x: np.ndarray, k_bins: int) -> np.ndarray:
    """Interior edges at the j/k quantiles, j = 1..k-1 (linear interpolation)."""
    return np.quantile(np.asarray(x, dtype=float), np.arange(1, k_bins) / k_bins)


def quantile_bin_mask(x: np.ndarray, edges: np.ndarray, index: int) -> np.ndarray:
    """Bin 0 is ``x <= e1``; bin i is ``e_i < x <= e_{i+1}``; the last bin is ``x > e_{k-1}``."""
    x = np.asarray(x, dtype=float)
    lo = -np.inf if index == 0 else edges[index - 1]
    hi = np.inf if index == len(edges) else edges[index]
    if index == 0:
        return x <= hi
    return (x > lo) & (x <= hi)


def _atom_mask(d: Dataset, atom) -> np.ndarray:
    col = d[atom.column]
    if isinstance(atom, InQuantileBin):
        edges = quantile_bin_edges(col.values, atom.k_bins)
        return quantile_bin_mask(col.values, edges, atom.index)
    values = atom.values if isinstance(atom, InSet) else (atom.value,)
    if col.kind == CATEGORICAL:
        codes = [col.labels.index(v) for v in values if v in col.labels]
        mask = np.isin(col.values, codes)
        if isinstance(atom, Compare) and atom.op == "!=":
            mask = ~mask
        return mask
    x = col.values.astype(float) if col.kind != BOOLEAN else col.values.astype(float)
    if isinstance(atom, InSet):
        return np.isin(x, [float(v) for v in values])
    return _OPS[atom.op](x, float(atom.value))


def predicate_mask(d: Dataset, pred: Predicate | None) -> np.ndarray:
    mask = np.ones(d.n_rows, dtype=bool)
    if pred is None:
        return mask
    for atom in pred.atoms:
        mask &= _atom_mask(d, atom)
    return mask


# --- bound statistics -----------------------------------------------------

@dataclass(frozen=True)
class _Failure:
    rows: np.ndarray
    error: SpecError


@dataclass
class BoundStatistic:
    """A statistic with its slice masks resolved against one dataset."""

    spec: StatisticSpec
    n_rows: int
    masks: dict = field(repr=False)

    def evaluate_many(self, Y: np.ndarray) -> np.ndarray:
        """Evaluate on each row of ``Y`` (shape ``(m, n_rows)``).

        Raises the :class:`SpecError` of the first failing row; the row
        indices are available on the exception as ``rows``.
        """
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if Y.shape[1] != self.n_rows:
            raise ValueError(f"expected vectors of length {self.n_rows}, got {Y.shape[1]}")
        failures: list[_Failure] = []
        vals = self._eval(self.spec.root, Y, failures)
        bad = np.isnan(vals)
        if bad.any():
            first = int(np.flatnonzero(bad)[0])
            err = next((f.error for f in failures if f.rows[first]), None)
            if err is None:
                err = DegenerateValueError("statistic evaluated to an undefined value")
            err.rows = np.flatnonzero(bad).tolist()
            raise err
        return vals

    def evaluate(self, y) -> float:
        return float(self.evaluate_many(np.asarray(y, dtype=float)[None, :])[0])

    def _eval(self, node: Expr, Y: np.ndarray, failures: list) -> np.ndarray:
        if isinstance(node, Agg):
            mask = self.masks[node.where]
            vals, bad = KERNELS[node.kind](Y[:, mask], node.params)
            if bad.any():
                failures.append(_Failure(bad, DegenerateMomentError(node.kind)))
            return vals
        lhs = self._eval(node.lhs, Y, failures)
        rhs = self._eval(node.rhs, Y, failures)
        with np.errstate(invalid="ignore", divide="ignore"):
            if node.op == "sub":
                out = lhs - rhs
            elif node.op == "abs_sub":
                out = np.abs(lhs - rhs)
            else:
                zero = rhs == 0
                out = lhs / np.where(zero, 1.0, rhs)
                out = np.where(zero, np.sign(lhs) * np.inf, out)
                out = np.where(zero & (lhs == 0), np.nan, out)
        undefined = np.isnan(out) & ~np.isnan(lhs) & ~np.isnan(rhs)
        if undefined.any():
            what = "0/0 or inf/inf" if node.op == "ratio" else "inf - inf"
            failures.append(_Failure(undefined, DegenerateValueError(f"{what} in {node.op}")))
        return out


def bind(spec: StatisticSpec, d: Dataset) -> BoundStatistic:
    """Check ``spec`` against ``d`` and precompute all slice masks.

    Raises :class:`EmptySliceError` if any slice selects no rows.
    """
    check_against_schema(spec, d)
    masks: dict = {}
    for agg in spec.aggregates():
        if agg.where in masks:
            continue
        mask = predicate_mask(d, agg.where)
        if not mask.any():
            raise EmptySliceError(describe_predicate(agg.where))
        mask.setflags(write=False)
        masks[agg.where] = mask
    return BoundStatistic(spec, d.n_rows, masks)


def evaluate(spec: StatisticSpec, d: Dataset, y=None) -> float:
    """Value of ``spec`` on target vector ``y`` (default: the observed target)."""
    y = d.y if y is None else np.asarray(y, dtype=float)
    if y.shape != (d.n_rows,):
        raise ValueError(f"target vector must have length {d.n_rows}")
    if not np.all(np.isfinite(y)):
        raise ValueError("target vector must be finite")
    return bind(spec, d).evaluate(y)


def validate_spec(spec: StatisticSpec, d: Dataset) -> BoundStatistic:
    """Dry-run ``spec`` on the observed data; returns the bound statistic.

    Any failure is raised as a :class:`SpecError` whose ``reason`` attribute
    names the rejection cause.
    """
    bound = bind(spec, d)
    bound.evaluate(d.y)
    return bound
