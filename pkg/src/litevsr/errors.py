"""Exception types shared across the package.

The CLI maps these onto stable exit codes, so new failure modes should
reuse one of the classes below instead of raising bare ValueErrors.
"""


class LiteVsrError(ValueError):
    pass


class ShapeError(LiteVsrError):
    """Dimension or channel-count mismatch between values and operators."""


class ConfigError(LiteVsrError):
    """Invalid or unknown configuration content; message is path-qualified."""


class NumericError(LiteVsrError):
    """Non-finite values or failed numeric validation."""
