"""Exception hierarchy.

Errors fall into three classes that the CLI maps onto exit codes: data
problems (bad input files, degenerate datasets), model/mitigation failures at
runtime, and everything else.
"""


class EdufairError(Exception):
    """Base class for all package errors."""


class DataError(EdufairError):
    """Input data violates a precondition."""


class MissingColumn(DataError):
    def __init__(self, column):
        super().__init__(f"column {column!r} not found in CSV header")
        self.column = column


class UnexpectedColumn(DataError):
    def __init__(self, column):
        super().__init__(f"CSV column {column!r} is not declared in the schema")
        self.column = column


class UnknownLevel(DataError):
    def __init__(self, row, column, value):
        super().__init__(f"row {row}: value {value!r} is not a declared level of {column!r}")
        self.row, self.column, self.value = row, column, value


class UnparseableNumeric(DataError):
    def __init__(self, row, column, value=None):
        super().__init__(f"row {row}: cannot parse {value!r} in numeric column {column!r}")
        self.row, self.column, self.value = row, column, value


class SchemaError(DataError):
    pass


class EmptyAfterCleaning(DataError):
    pass


class EmptyDataset(DataError):
    pass


class EmptyStratum(DataError):
    def __init__(self, group, outcome):
        super().__init__(f"stratum (group={group!r}, outcome={outcome}) has no rows")
        self.group, self.outcome = group, outcome


# metrics

class MetricError(EdufairError):
    pass


class LengthMismatch(MetricError):
    pass


class EmptyInput(MetricError):
    pass


class UnknownGroup(MetricError):
    pass


class OverlappingGroups(MetricError):
    pass


class SingleGroup(MetricError):
    pass


class InvalidPartition(MetricError):
    pass


# models

class ModelError(EdufairError):
    pass


class SingleClassTraining(ModelError):
    pass


class NonPositiveWeight(ModelError):
    pass


class DimensionMismatch(ModelError):
    pass


class EmptyGrid(ModelError):
    pass


class FoldClassCollapse(ModelError):
    pass


# mitigation

class MitigationError(EdufairError):
    pass


class UncoveredGroup(MitigationError):
    pass


class EmptyCell(MitigationError):
    def __init__(self, s, y):
        super().__init__(f"no training rows with s={s}, y={y}")
        self.s, self.y = s, y


class NonNumericColumn(MitigationError):
    pass


class DegenerateScores(MitigationError):
    pass


# harness

class EmptyResults(EdufairError):
    pass


class ReportIOError(EdufairError, OSError):
    pass
