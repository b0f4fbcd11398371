class QSWError(Exception):
    """Base class of every error raised by the library."""
    exit_code = 1


class ValidationError(QSWError, ValueError):
    """Input violates a type invariant or an operation precondition."""
    exit_code = 2


class CertificationError(QSWError):
    """A witness contract failed: some rank-(k-1) vector gives a negative value."""
    exit_code = 3

    def __init__(self, message, vector=None, value=None):
        super(CertificationError, self).__init__(message)
        self.vector = vector
        self.value = value


class SearchError(QSWError):
    """A search that is guaranteed to succeed came back empty."""

    def __init__(self, message, telemetry=None):
        super(SearchError, self).__init__(message)
        self.telemetry = telemetry or {}


class NumericalError(QSWError):
    """An intermediate operator lost positivity beyond tolerance."""

    def __init__(self, message, eigenvalue=None):
        super(NumericalError, self).__init__(message)
        self.eigenvalue = eigenvalue
