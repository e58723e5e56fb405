"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class VadTreeError(Exception):
    exit_code = 1


class InvalidInput(VadTreeError, ValueError):
    exit_code = 1


class CoverageViolation(InvalidInput):
    """Frames are missing or covered twice."""

    def __init__(self, message, frame=None):
        super().__init__(message)
        self.frame = frame


class UndefinedMetric(VadTreeError):
    exit_code = 1


class InternalConsistencyError(VadTreeError):
    exit_code = 3


class BackendError(VadTreeError):
    exit_code = 2


class BackendUnavailable(BackendError):
    pass


class RequestRejected(BackendError):
    def __init__(self, message, status_code=None):
        super().__init__(message)
        self.status_code = status_code


class FixtureMiss(BackendError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class ParseFailure(VadTreeError, ValueError):
    exit_code = 2


class PartialResults(BackendError):
    def __init__(self, message, failed=()):
        super().__init__(message)
        self.failed = list(failed)
