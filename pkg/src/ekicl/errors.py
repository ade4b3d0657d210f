"""Shared exception types.

The CLI maps these onto exit codes: DataError -> 2, TransportError -> 3
(usage problems exit 1).
"""


class DataError(Exception):
    """A corpus, embedding file, checkpoint, or report failed validation."""


class TransportError(Exception):
    """An HTTP completion request failed after exhausting retries."""


class GatewayTimeout(TransportError):
    """The completion request timed out."""
