"""Exception types shared across the package."""


class NumericBreakdown(ArithmeticError):
    """A solve or iteration lost definiteness or hit a singular system."""


class InvalidState(RuntimeError):
    """An operation was requested on data that lacks what it needs."""
