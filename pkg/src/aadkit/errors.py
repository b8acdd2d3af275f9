"""Exception hierarchy shared by all modules."""


class ToolkitError(Exception):
    """Base class for every error raised by this package."""


class InvalidRate(ToolkitError):
    """Sampling rate is zero, negative, or otherwise unusable."""


class NonFiniteInput(ToolkitError):
    """Input data contains NaN or infinity."""


class InvalidFilterSpec(ToolkitError):
    """Filter edges or kind are invalid for the given sampling rate."""


class UpsamplingUnsupported(ToolkitError):
    """Requested target rate exceeds the input rate."""


class ConstantChannel(ToolkitError):
    """A channel has zero variance and cannot be normalized."""


class MonoRequired(ToolkitError):
    """Operation accepts single-channel audio only."""


class InvalidBand(ToolkitError):
    """Analysis band is empty or extends past Nyquist."""


class InvalidWindow(ToolkitError):
    """Smoothing window length is invalid (even, or not above the polynomial order)."""


class InsufficientChannels(ToolkitError):
    """Too few channels for the requested referencing scheme."""


class UnknownChannel(ToolkitError):
    """A referenced channel label is not present in the recording."""


class RateMismatch(ToolkitError):
    """Two series that must share a sampling rate do not."""


class DimensionMismatch(ToolkitError):
    """Array shapes, lag grids, or channel counts do not line up."""


class DegenerateBasis(ToolkitError):
    """Basis window support is below one sample."""


class MissingValidation(ToolkitError):
    """Boosting was given no held-out validation data."""


class DegenerateInput(ToolkitError):
    """Regression input or target has zero variance."""


class UndefinedCorrelation(ToolkitError):
    """Pearson correlation of a constant sequence is undefined."""


class InsufficientTrials(ToolkitError):
    """Too few trials for leave-one-trial-out cross-validation."""


class WindowTooLong(ToolkitError):
    """No usable segment can hold a decision window of the requested length."""


class InvalidSpec(ToolkitError):
    """Simulation spec is inconsistent (e.g. peak latency outside the lag grid)."""


class DegenerateTest(ToolkitError):
    """Statistical test input has zero variance or too few subjects."""


class InsufficientPermutations(ToolkitError):
    """Permutation count is too small for a stable null distribution."""


class IoError(ToolkitError):
    """A file could not be read or written; message names the path."""


class ConfigError(ToolkitError):
    """Run configuration is missing, malformed, or fails validation."""


class NoInputs(ToolkitError):
    """Command received an empty input list."""
