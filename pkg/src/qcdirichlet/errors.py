"""Exception hierarchy shared by every module of the toolkit."""


class ToolkitError(Exception):
    """Base class; ``code`` is the short error tag used in reports and CSVs."""

    code = "error"


class InvalidArgument(ToolkitError, ValueError):
    code = "invalid-argument"


class InvalidDomain(ToolkitError, ValueError):
    code = "invalid-domain"


class EllipticityViolation(ToolkitError, ValueError):
    code = "ellipticity-violation"

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class SupportViolation(ToolkitError, ValueError):
    code = "support-violation"


class ResolutionGuard(ToolkitError, ValueError):
    code = "resolution-guard"


class NoConvergence(ToolkitError, RuntimeError):
    """Raised when an iteration hits its cap; ``result`` carries the last iterate."""

    code = "no-convergence"

    def __init__(self, message, result=None, stage=None):
        super().__init__(message)
        self.result = result
        self.stage = stage


class StageError(ToolkitError):
    """Wraps an error raised inside a pipeline stage, keeping the stage tag."""

    def __init__(self, stage, error):
        super().__init__(f"[{stage}] {error}")
        self.stage = stage
        self.error = error
        self.code = getattr(error, "code", "error")
