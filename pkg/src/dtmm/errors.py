"""Exception hierarchy shared by all modules."""


class DTMMError(Exception):
    """Base class for every error raised by the package."""


class ParseError(DTMMError):
    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        where = ""
        if line is not None:
            where = f"line {line}"
            if col is not None:
                where += f", col {col}"
            where += ": "
        elif col is not None:
            where = f"col {col}: "
        super().__init__(where + message)


class CoeffDomainError(DTMMError):
    """A coefficient expression produced a non-finite value."""

    def __init__(self, index, x, detail=""):
        self.index = index
        self.x = x
        msg = f"coefficient a{index} is not finite at x={x!r}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class UnsupportedCoefficientError(DTMMError):
    pass


class NumericFailure(DTMMError):
    """Root finding, overflow, or step control gave up."""

    def __init__(self, message, x=None):
        self.x = x
        super().__init__(message if x is None else f"{message} (x={x!r})")


class DegeneracyError(DTMMError):
    """Two characteristic roots are closer than the degeneracy threshold."""

    def __init__(self, x, pair=None, gap=None, message=None):
        self.x = x
        self.pair = pair
        self.gap = gap
        if message is None:
            message = f"degenerate root frame at x={x!r}"
            if pair is not None:
                message += f": roots {pair[0]} and {pair[1]} collide"
            if gap is not None:
                message += f" (gap {gap:.3e})"
        super().__init__(message)


class EntirelyDegenerateError(DTMMError):
    """Roots stay coincident over a whole subinterval; not handled."""

    def __init__(self, x_lo, x_hi):
        self.x_lo = x_lo
        self.x_hi = x_hi
        super().__init__(
            f"characteristic roots are degenerate on all of [{x_lo!r}, {x_hi!r}]; "
            "entirely degenerate domains are not supported"
        )


class ChainingError(DTMMError):
    def __init__(self, index, x_to, x_from):
        self.index = index
        super().__init__(
            f"transfer {index} ends at x={x_to!r} but transfer {index + 1} "
            f"starts at x={x_from!r}"
        )


class OracleConvergenceError(NumericFailure):
    pass
