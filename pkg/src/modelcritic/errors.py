"""Exception hierarchy.

Every failure the engine can report is a subclass of :class:`CriticError`, so
callers that only care about "did it work" can catch one type, while tests and
the CLI can discriminate on the concrete variant.
"""

from __future__ import annotations


class CriticError(Exception):
    """Base class for all engine errors."""


# --- data ingestion -------------------------------------------------------

class DataError(CriticError):
    pass


class MissingFileError(DataError):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"file not found: {self.path}")


class RaggedRowError(DataError):
    def __init__(self, row: int, expected: int, got: int):
        self.row, self.expected, self.got = row, expected, got
        super().__init__(f"row {row}: expected {expected} fields, got {got}")


class MissingColumnError(DataError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"column {column!r} not present")


class MissingValueError(DataError):
    def __init__(self, row: int, column: str):
        self.row, self.column = row, column
        super().__init__(f"missing value at row {row}, column {column!r}")


class TargetNotNumericError(DataError):
    def __init__(self, column: str, kind: str):
        self.column, self.kind = column, kind
        super().__init__(f"target column {column!r} is {kind}, expected real or integer")


class SchemaError(DataError):
    """Structural problem with a dataset or metadata record."""


class ReplicateLengthMismatchError(DataError):
    def __init__(self, index: int, expected: int, got: int):
        self.index, self.expected, self.got = index, expected, got
        super().__init__(f"replicate {index} has length {got}, expected {expected}")


class NonFiniteSampleError(DataError):
    def __init__(self, index: int, position: int):
        self.index, self.position = index, position
        super().__init__(f"non-finite value in replicate {index} at position {position}")


class EmptySampleSetError(DataError):
    def __init__(self):
        super().__init__("sample set contains no replicates")


class AlignmentError(DataError):
    def __init__(self, n_rows: int, replicate_length: int):
        self.n_rows, self.replicate_length = n_rows, replicate_length
        super().__init__(
            f"replicate length {replicate_length} does not match dataset n_rows {n_rows}"
        )


# --- statistic DSL --------------------------------------------------------

class SpecError(CriticError):
    """A statistic that cannot be parsed, bound, or evaluated."""

    reason = "invalid"


class DSLSyntaxError(SpecError):
    reason = "syntax"

    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


class DepthExceededError(SpecError):
    reason = "too_deep"


class UnknownColumnError(SpecError):
    reason = "unknown_column"

    def __init__(self, column: str):
        self.column = column
        super().__init__(f"unknown column {column!r}")


class PredicateTypeError(SpecError):
    reason = "type_mismatch"


class BinIndexOutOfRangeError(SpecError):
    reason = "bin_index_out_of_range"

    def __init__(self, k_bins: int, index: int):
        self.k_bins, self.index = k_bins, index
        super().__init__(f"bin index {index} outside 0..{k_bins - 1}")


class ParameterRangeError(SpecError):
    reason = "parameter_out_of_range"


class EmptySliceError(SpecError):
    reason = "empty_slice"

    def __init__(self, predicate: str):
        self.predicate = predicate
        super().__init__(f"slice matches no rows: {predicate}")


class DegenerateMomentError(SpecError):
    reason = "degenerate_moment"

    def __init__(self, kind: str, rows=None):
        self.kind = kind
        self.rows = [] if rows is None else list(rows)
        where = f" (replicate rows {self.rows[:5]})" if self.rows else ""
        super().__init__(f"{kind} undefined for a constant vector{where}")


class DegenerateValueError(SpecError):
    """A combine produced an undefined value such as 0/0 or inf - inf."""

    reason = "degenerate_value"


# --- hypothesis testing ---------------------------------------------------

class ReplicateEvaluationError(CriticError):
    def __init__(self, index: int, cause: SpecError):
        self.index = index
        self.cause = cause
        super().__init__(f"replicate {index}: {cause}")


class EmptyFamilyError(CriticError):
    def __init__(self):
        super().__init__("no test results to decide on")


# --- model fitting / proposer --------------------------------------------

class FamilyError(CriticError):
    """Invalid family hyperparameters or incompatible dataset."""


class FitError(CriticError):
    def __init__(self, family: str, message: str, diagnostics: dict | None = None):
        self.family = family
        self.diagnostics = diagnostics or {}
        super().__init__(f"{family}: {message}")


class ProposerError(CriticError):
    pass


class TransportError(ProposerError):
    pass


class MalformedBatchError(ProposerError):
    pass
