"""Exception types shared across the package."""


class ParseError(ValueError):
    """Malformed input file; the message carries the offending line/element."""


class ConfigError(ValueError):
    """Invalid experiment or solver configuration."""


class NumericAbort(RuntimeError):
    """A numeric invariant broke (NaN, unconverged potentials, ...)."""
