"""Exception types shared across the package.

Plain contract violations (bad colorspace, even kernel, dimension
mismatch) raise ValueError; the classes below cover failures that
callers are expected to branch on.
"""


class SharpoptError(Exception):
    """Base class for package-specific failures."""


class ConfigError(SharpoptError):
    """Invalid or unknown configuration (bad template, unknown key)."""


class AdapterError(SharpoptError):
    """External tool invocation failed (non-zero exit, bad output, timeout)."""

    def __init__(self, message, stderr=None, raw_output=None):
        super().__init__(message)
        self.stderr = stderr
        self.raw_output = raw_output


class AdapterUnavailableError(AdapterError):
    """External tool is not installed or not executable.

    Distinct from AdapterError so callers can fall back to a native
    metric instead of treating it as a hard failure.
    """


class NoOverlapError(SharpoptError):
    """Two RD curves share no quality interval; BD values are undefined."""


class FitError(SharpoptError):
    """Polynomial fit is rank deficient or too ill-conditioned to trust."""


class LabelError(SharpoptError):
    """A video's sweep failed part-way; carries whatever was measured."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial if partial is not None else []


class TrainDivergedError(SharpoptError):
    """Training loss became non-finite; carries step diagnostics."""

    def __init__(self, message, step=None, loss=None):
        super().__init__(message)
        self.step = step
        self.loss = loss
