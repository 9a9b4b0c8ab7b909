"""Exception hierarchy shared across the package."""


class PIRError(Exception):
    """Base class for all package errors."""


class ParameterError(PIRError, ValueError):
    """Invalid parameters: divisibility violations, out-of-range values, length mismatches."""


class FormatError(PIRError):
    """A file or frame does not match its declared binary format."""


class ProtocolError(PIRError):
    """A query or response is malformed or missing for the scheme in use."""


class HypothesisNotMet(ParameterError):
    """A bound was requested outside the range where it is proven."""


class RetrievalError(PIRError):
    """A networked retrieval failed; ``server`` names the 1-based server that failed."""

    def __init__(self, server: int, reason: str):
        super().__init__(f"server {server}: {reason}")
        self.server = server
        self.reason = reason
