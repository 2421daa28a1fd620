"""Exception hierarchy shared by the estimation pipeline."""


class EstimationError(Exception):
    """Base class for every error raised by :mod:`rrr_ekf`."""


class ConfigError(EstimationError, ValueError):
    """Invalid or missing configuration (CLI exit code 2)."""


class ChannelRangeError(EstimationError, ValueError):
    """Interpolation requested outside a channel's time span."""

    def __init__(self, channel, t, lo, hi):
        self.channel = channel
        self.t = t
        super().__init__(
            f"channel {channel!r}: t={t!r} outside sampled span [{lo!r}, {hi!r}]"
        )


class ConstantsError(EstimationError, ValueError):
    """Model constants violate a physical invariant."""


class DegenerateInputError(EstimationError, ValueError):
    """An exogenous input drives the model into a singular configuration."""


class NumericError(EstimationError, ArithmeticError):
    """Non-finite value or singular matrix inside a numeric routine (exit code 3)."""

    def __init__(self, message, step=None, time=None):
        self.step = step
        self.time = time
        super().__init__(message)


class DivergenceError(NumericError):
    """Filter, smoother or simulation produced a non-finite state."""

    def __init__(self, message, step=None, time=None, last_state=None, iteration=None):
        self.last_state = last_state
        self.iteration = iteration
        super().__init__(message, step=step, time=time)


class EmptyDataError(EstimationError, ValueError):
    """A statistic was requested over zero samples."""


class DatasetError(EstimationError, ValueError):
    """Malformed dataset file (missing column, unknown unit, bad time axis)."""
