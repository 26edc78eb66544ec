"""Exception hierarchy shared by all hthgn modules."""


class HthgnError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(HthgnError):
    """A data file line could not be parsed; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class SchemaError(HthgnError):
    """Type registry or snapshot structure violates the data model."""


class NodeNotFoundError(HthgnError):
    """A queried node is absent from the snapshot."""


class ShapeError(HthgnError):
    """Tensor dimensions do not agree; names both offending shapes."""


class ContractError(HthgnError):
    """A precondition of an operation was violated by the caller."""


class UsageError(HthgnError):
    """Bad configuration key, value, or CLI usage."""


class MetricError(HthgnError):
    """Ranking metrics are undefined for the given labels."""


class DeterminismError(HthgnError):
    """A loss function expected to be deterministic produced differing values."""
