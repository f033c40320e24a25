"""Exception types shared by the library and the command line runner."""


class KontsevichError(Exception):
    """Base class for every error raised by this package."""


class MixedLength(KontsevichError, ValueError):
    pass


class OutOfRange(KontsevichError, ValueError):
    pass


class NonRationalSpectrum(KontsevichError, ArithmeticError):
    """The characteristic polynomial does not split over the rationals."""

    def __init__(self, roots, remainder):
        self.roots = roots
        self.remainder = remainder
        super().__init__(
            f"characteristic polynomial keeps a factor of degree "
            f"{len(remainder) - 1} without rational roots")


class BaseMismatch(KontsevichError, ValueError):
    pass


class IndexOutOfRange(KontsevichError, IndexError):
    pass


class InvalidChart(KontsevichError, ValueError):
    pass


class UnsupportedGeometry(KontsevichError, ValueError):
    pass


class WindowTooSmall(KontsevichError, ValueError):
    pass


class TruncationUnstable(KontsevichError, RuntimeError):
    pass


class BracketCheckFailed(KontsevichError, AssertionError):
    """An assembled model violates an operator identity; always a bug."""


class InvalidInput(KontsevichError, ValueError):
    pass


class ConfigError(KontsevichError, ValueError):
    pass
