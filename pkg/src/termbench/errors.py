"""Exception types shared across the harness.

The CLI maps these onto exit codes: domain/validation problems exit 1,
I/O and transport problems exit 2.
"""

from __future__ import annotations


class HarnessError(Exception):
    """Base class for all harness errors."""


class ParseError(HarnessError):
    """Malformed input file; carries the 1-based line number when known."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class ValidationError(HarnessError):
    """Well-formed input that violates a domain rule (bad identifier, duplicate key)."""


class DomainError(HarnessError):
    """Operation called outside its stated preconditions."""


class ConsistencyError(HarnessError):
    """Cross-artifact mismatch (e.g. sampled identifier missing from the record set)."""


class ProtocolError(HarnessError):
    """Remote service answered with an unparseable or contract-violating payload."""


class TransportError(HarnessError):
    """Transient network failure that survived the retry budget."""


class PermanentHttpError(HarnessError):
    """Non-retryable HTTP status (4xx other than 429)."""

    def __init__(self, status: int, message: str = ""):
        self.status = status
        super().__init__(f"HTTP {status}: {message}" if message else f"HTTP {status}")


class NumericalError(HarnessError):
    """Numerical routine failed to converge to its stated tolerance."""
