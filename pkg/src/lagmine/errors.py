"""Exception types shared across the package."""


class LagmineError(Exception):
    """Base class for all errors raised by this package."""


class SchemaMismatchError(LagmineError):
    """A predicate or column refers to an RPC the dataset does not know."""


class ParseError(LagmineError):
    """Malformed input file (CSV cell, span record, config field)."""


class TraceStructureError(LagmineError):
    """A span group does not form a well-shaped trace (roots, parents)."""


class InsufficientDataError(LagmineError):
    """Too few samples to run the requested estimator."""


class StaleTablesError(LagmineError):
    """A predicate endpoint is missing from the precomputed bit tables."""


class DegenerateAnalysisError(LagmineError):
    """No request violates the SLO; there is nothing to explain."""


class EmptySearchSpaceError(LagmineError):
    """No RPC produced a usable set of eligible split points."""


class NoSolutionError(LagmineError):
    """The search finished with an empty archive."""


class LabelMissingError(LagmineError):
    """The dataset lacks the ground-truth labels an operation needs."""


class ConfigError(LagmineError):
    """Invalid run or scenario configuration."""
