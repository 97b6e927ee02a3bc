"""Shared exception types."""


class FormatError(ValueError):
    """Malformed input data (dataset records, model specs, CSV sidecars)."""


class BudgetExhaustedError(RuntimeError):
    """An oracle query was attempted past the query limit."""


class TransportError(RuntimeError):
    """HTTP oracle failure: bad status, malformed body, or timeout."""
