"""A small declarative language for test statistics.

A statistic aggregates the target vector, optionally restricted to the rows
matching a predicate over feature columns, and may combine two statistics by
difference, absolute difference, or ratio::

    std(where floor == 0) - std(where floor == 1)
    variance(where uppm in quantile_bin(3, 2)) / variance(where uppm in quantile_bin(3, 0))
    abs(mean(where soil == "clay") - mean(where soil in {"loam", "sand"}))
    quantile(0.9, where county == "c3 and x")
    proportion_outside(1, 7)

Grammar (EBNF)::

    statistic  = difference ;
    difference = quotient { "-" quotient } ;
    quotient   = primary { "/" primary } ;
    primary    = "(" difference ")"
               | "abs" "(" difference ")"          (* operand must be a difference *)
               | aggregate ;
    aggregate  = AGG "(" [ params ] [ [ "," ] "where" predicate ] ")" ;
    params     = number { "," number } ;
    predicate  = atom { "and" atom } ;
    atom       = IDENT CMP literal
               | IDENT "in" "{" literal { "," literal } "}"
               | IDENT "in" "quantile_bin" "(" INT "," INT ")" ;
    CMP        = "==" | "!=" | "<" | "<=" | ">" | ">=" ;
    literal    = number | STRING | "true" | "false" | IDENT ;

Bare identifiers in literal position are read as string labels. The printer
always emits the canonical form: literals quoted, numbers in shortest
round-trip form, every nested combination parenthesized.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Any, Union

from .errors import (
    BinIndexOutOfRangeError,
    DepthExceededError,
    DSLSyntaxError,
    ParameterRangeError,
    SpecError,
)

MAX_DEPTH = 8
MAX_BINS = 100

# aggregate name -> number of numeric parameters
AGGREGATES: dict[str, int] = {
    "mean": 0,
    "variance": 0,
    "std": 0,
    "min": 0,
    "max": 0,
    "range": 0,
    "quantile": 1,
    "count": 0,
    "skewness": 0,
    "excess_kurtosis": 0,
    "dispersion_ratio": 0,
    "proportion_outside": 2,
}

COMPARISONS = ("==", "!=", "<", "<=", ">", ">=")
COMBINE_OPS = ("sub", "abs_sub", "ratio")
_KEYWORDS = {"where", "and", "in", "abs", "quantile_bin", "true", "false"}

Literal = Union[bool, int, float, str]


# --- AST ------------------------------------------------------------------

@dataclass(frozen=True)
class Compare:
    column: str
    op: str
    value: Literal


@dataclass(frozen=True)
class InSet:
    column: str
    values: tuple


@dataclass(frozen=True)
class InQuantileBin:
    column: str
    k_bins: int
    index: int


Atom = Union[Compare, InSet, InQuantileBin]


@dataclass(frozen=True)
class Predicate:
    atoms: tuple

    @property
    def columns(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for a in self.atoms:
            seen.setdefault(a.column, None)
        return tuple(seen)


@dataclass(frozen=True)
class Agg:
    kind: str
    params: tuple = ()
    where: Predicate | None = None


@dataclass(frozen=True)
class Combine:
    op: str
    lhs: "Expr"
    rhs: "Expr"


Expr = Union[Agg, Combine]


@dataclass(frozen=True)
class StatisticSpec:
    root: Expr

    def __post_init__(self):
        check_node(self.root)
        if depth(self.root) > MAX_DEPTH:
            raise DepthExceededError(f"expression depth {depth(self.root)} exceeds {MAX_DEPTH}")

    @property
    def text(self) -> str:
        return print_spec(self)

    def __str__(self):
        return self.text

    def aggregates(self) -> list[Agg]:
        return list(iter_aggs(self.root))

    def columns(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for a in self.aggregates():
            if a.where is not None:
                for c in a.where.columns:
                    seen.setdefault(c, None)
        return tuple(seen)


def iter_aggs(node: Expr):
    if isinstance(node, Agg):
        yield node
    else:
        yield from iter_aggs(node.lhs)
        yield from iter_aggs(node.rhs)


def depth(node: Expr) -> int:
    if isinstance(node, Agg):
        return 1
    return 1 + max(depth(node.lhs), depth(node.rhs))


def check_node(node: Expr) -> None:
    """Structural validity that does not depend on any dataset."""
    if isinstance(node, Combine):
        if node.op not in COMBINE_OPS:
            raise SpecError(f"unknown combine op {node.op!r}")
        check_node(node.lhs)
        check_node(node.rhs)
        return
    if not isinstance(node, Agg):
        raise SpecError(f"not an expression node: {node!r}")
    if node.kind not in AGGREGATES:
        raise SpecError(f"unknown aggregate {node.kind!r}")
    if len(node.params) != AGGREGATES[node.kind]:
        raise ParameterRangeError(
            f"{node.kind} takes {AGGREGATES[node.kind]} parameter(s), got {len(node.params)}"
        )
    for p in node.params:
        if isinstance(p, bool) or not isinstance(p, (int, float)) or not math.isfinite(p):
            raise ParameterRangeError(f"{node.kind}: parameters must be finite numbers")
    if node.kind == "quantile" and not 0 < node.params[0] < 1:
        raise ParameterRangeError(f"quantile level {node.params[0]} outside (0, 1)")
    if node.kind == "proportion_outside" and not node.params[0] <= node.params[1]:
        raise ParameterRangeError("proportion_outside needs lo <= hi")
    if node.where is not None:
        if not node.where.atoms:
            raise SpecError("empty predicate")
        for a in node.where.atoms:
            if isinstance(a, InQuantileBin):
                if not 2 <= a.k_bins <= MAX_BINS:
                    raise ParameterRangeError(f"quantile_bin needs 2..{MAX_BINS} bins, got {a.k_bins}")
                if not 0 <= a.index < a.k_bins:
                    raise BinIndexOutOfRangeError(a.k_bins, a.index)
            elif isinstance(a, Compare):
                if a.op not in COMPARISONS:
                    raise SpecError(f"unknown comparison {a.op!r}")
            elif isinstance(a, InSet):
                if not a.values:
                    raise SpecError("empty label set")


# --- printing -------------------------------------------------------------

def _fmt_number(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def _fmt_literal(v) -> str:
    if isinstance(v, str):
        return json.dumps(v)
    return _fmt_number(v)


def _fmt_atom(a: Atom) -> str:
    if isinstance(a, Compare):
        return f"{a.column} {a.op} {_fmt_literal(a.value)}"
    if isinstance(a, InSet):
        return f"{a.column} in {{{', '.join(_fmt_literal(v) for v in a.values)}}}"
    return f"{a.column} in quantile_bin({a.k_bins}, {a.index})"


def _fmt_expr(node: Expr, nested: bool) -> str:
    if isinstance(node, Agg):
        parts = [_fmt_number(p) for p in node.params]
        if node.where is not None:
            parts.append("where " + " and ".join(_fmt_atom(a) for a in node.where.atoms))
        return f"{node.kind}({', '.join(parts)})"
    lhs, rhs = _fmt_expr(node.lhs, True), _fmt_expr(node.rhs, True)
    if node.op == "abs_sub":
        return f"abs({lhs} - {rhs})"
    text = f"{lhs} {'-' if node.op == 'sub' else '/'} {rhs}"
    return f"({text})" if nested else text


def print_spec(spec: StatisticSpec | Expr) -> str:
    root = spec.root if isinstance(spec, StatisticSpec) else spec
    return _fmt_expr(root, nested=False)


def describe_predicate(pred: Predicate | None) -> str:
    if pred is None:
        return "all rows"
    return " and ".join(_fmt_atom(a) for a in pred.atoms)


# --- tokenizing and parsing ----------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<op>==|!=|<=|>=|<|>|[-/(){},])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks, pos = [], 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise DSLSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.tok
        found = repr(tok.text) if tok.kind != "eof" else "end of input"
        raise DSLSyntaxError(f"{msg}, found {found}", tok.pos, self.text)

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind in ("op", "ident"):
            self.i += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            self.error(f"expected {text!r}")

    def parse(self) -> Expr:
        node = self.difference()
        if self.tok.kind != "eof":
            self.error("unexpected trailing input")
        return node

    def difference(self) -> Expr:
        node = self.quotient()
        while self.accept("-"):
            node = Combine("sub", node, self.quotient())
        return node

    def quotient(self) -> Expr:
        node = self.primary()
        while self.accept("/"):
            node = Combine("ratio", node, self.primary())
        return node

    def primary(self) -> Expr:
        tok = self.tok
        if self.accept("("):
            node = self.difference()
            self.expect(")")
            return node
        if tok.kind == "ident" and tok.text == "abs":
            self.i += 1
            self.expect("(")
            inner_tok = self.tok
            inner = self.difference()
            self.expect(")")
            if not (isinstance(inner, Combine) and inner.op == "sub"):
                self.error("abs() takes a difference of two statistics", inner_tok)
            return Combine("abs_sub", inner.lhs, inner.rhs)
        if tok.kind == "ident" and tok.text in AGGREGATES:
            return self.aggregate()
        if tok.kind == "ident" and tok.text not in _KEYWORDS:
            self.error(f"unknown aggregate {tok.text!r}; expected one of {', '.join(AGGREGATES)}")
        self.error("expected an aggregate or '('")

    def aggregate(self) -> Agg:
        name_tok = self.tok
        kind = name_tok.text
        self.i += 1
        self.expect("(")
        params: list = []
        where = None
        if self.tok.text != ")" and self.tok.text != "where":
            params.append(self.number())
            while self.accept(","):
                if self.tok.text == "where":
                    break
                params.append(self.number())
        if self.accept("where"):
            where = self.predicate()
        self.expect(")")
        if len(params) != AGGREGATES[kind]:
            raise DSLSyntaxError(
                f"{kind} takes {AGGREGATES[kind]} parameter(s), got {len(params)}", name_tok.pos, self.text
            )
        return Agg(kind, tuple(params), where)

    def number(self):
        neg = self.accept("-")
        tok = self.tok
        if tok.kind != "number":
            self.error("expected a number")
        self.i += 1
        v = _to_number(tok.text)
        return -v if neg else v

    def integer(self) -> int:
        tok = self.tok
        v = self.number()
        if not isinstance(v, int):
            self.error("expected an integer", tok)
        return v

    def predicate(self) -> Predicate:
        atoms = [self.atom()]
        while self.accept("and"):
            atoms.append(self.atom())
        return Predicate(tuple(atoms))

    def atom(self) -> Atom:
        tok = self.tok
        if tok.kind != "ident" or tok.text in _KEYWORDS:
            self.error("expected a column name")
        self.i += 1
        col = tok.text
        if self.accept("in"):
            if self.accept("quantile_bin"):
                self.expect("(")
                k = self.integer()
                self.expect(",")
                idx = self.integer()
                self.expect(")")
                return InQuantileBin(col, k, idx)
            self.expect("{")
            vals = [self.literal()]
            while self.accept(","):
                vals.append(self.literal())
            self.expect("}")
            return InSet(col, tuple(vals))
        if self.tok.kind == "op" and self.tok.text in COMPARISONS:
            op = self.tok.text
            self.i += 1
            return Compare(col, op, self.literal())
        self.error("expected a comparison or 'in'")

    def literal(self):
        tok = self.tok
        if tok.kind == "string":
            self.i += 1
            return json.loads(tok.text)
        if tok.kind == "ident" and tok.text in ("true", "false"):
            self.i += 1
            return tok.text == "true"
        if tok.kind == "ident" and tok.text not in _KEYWORDS:
            self.i += 1
            return tok.text
        if tok.kind == "number" or tok.text == "-":
            return self.number()
        self.error("expected a literal")


def _to_number(text: str):
    if re.fullmatch(r"\d+", text):
        return int(text)
    return float(text)


def parse_spec(text: str, schema=None) -> StatisticSpec:
    """Parse DSL text into a :class:`StatisticSpec`.

    When ``schema`` (a :class:`~modelcritic.data.Schema` or
    :class:`~modelcritic.data.Dataset`) is given, column references and
    literal types are checked as well.
    """
    parser = _Parser(text)
    spec = StatisticSpec(parser.parse())
    if schema is not None:
        from .statistic import check_against_schema

        check_against_schema(spec, schema)
    return spec


# --- structured-record form ----------------------------------------------

def _atom_to_record(a: Atom) -> dict[str, Any]:
    if isinstance(a, Compare):
        return {"col": a.column, "op": a.op, "value": a.value}
    if isinstance(a, InSet):
        return {"col": a.column, "op": "in", "value": list(a.values)}
    return {"col": a.column, "op": "in_quantile_bin", "k": a.k_bins, "index": a.index}


def _expr_to_record(node: Expr) -> dict[str, Any]:
    if isinstance(node, Combine):
        return {"op": node.op, "lhs": _expr_to_record(node.lhs), "rhs": _expr_to_record(node.rhs)}
    rec: dict[str, Any] = {"agg": node.kind}
    if node.kind == "quantile":
        rec["q"] = node.params[0]
    elif node.kind == "proportion_outside":
        rec["lo"], rec["hi"] = node.params
    if node.where is not None:
        rec["where"] = [_atom_to_record(a) for a in node.where.atoms]
    return rec


def spec_to_record(spec: StatisticSpec) -> dict[str, Any]:
    """JSON-shaped AST, e.g. ``{"agg": "std", "where": [{"col": "floor", "op": "==", "value": 0}]}``."""
    return _expr_to_record(spec.root)


def _atom_from_record(rec) -> Atom:
    if not isinstance(rec, dict) or "col" not in rec or "op" not in rec:
        raise DSLSyntaxError("predicate atom needs 'col' and 'op'", 0)
    op = rec["op"]
    if op == "in_quantile_bin":
        return InQuantileBin(str(rec["col"]), int(rec["k"]), int(rec["index"]))
    if op == "in":
        vals = rec.get("value")
        if not isinstance(vals, list):
            raise DSLSyntaxError("'in' atoms need a list value", 0)
        return InSet(str(rec["col"]), tuple(vals))
    if op not in COMPARISONS:
        raise DSLSyntaxError(f"unknown comparison {op!r}", 0)
    return Compare(str(rec["col"]), op, rec.get("value"))


def _expr_from_record(rec) -> Expr:
    if not isinstance(rec, dict):
        raise DSLSyntaxError("expression record must be an object", 0)
    if "agg" in rec:
        kind = rec["agg"]
        if kind not in AGGREGATES:
            raise DSLSyntaxError(f"unknown aggregate {kind!r}", 0)
        if kind == "quantile":
            params = (rec.get("q"),)
        elif kind == "proportion_outside":
            params = (rec.get("lo"), rec.get("hi"))
        else:
            params = ()
        where = rec.get("where")
        pred = Predicate(tuple(_atom_from_record(a) for a in where)) if where else None
        return Agg(kind, params, pred)
    if rec.get("op") in COMBINE_OPS and "lhs" in rec and "rhs" in rec:
        return Combine(rec["op"], _expr_from_record(rec["lhs"]), _expr_from_record(rec["rhs"]))
    raise DSLSyntaxError("record is neither an aggregate nor a combination", 0)


def spec_from_record(rec, schema=None) -> StatisticSpec:
    root = _expr_from_record(rec)
    spec = StatisticSpec(root)
    if schema is not None:
        from .statistic import check_against_schema

        check_against_schema(spec, schema)
    return spec
