"""Exception hierarchy.

Input problems derive from :class:`InputError` (CLI exit code 1); numerical
pathologies derive from :class:`NumericalError` (CLI exit code 3).
"""


class CutoffLabError(Exception):
    """Base class for every error raised by the package."""


class InputError(CutoffLabError, ValueError):
    """The caller supplied an invalid chain, parameter or file."""


class NumericalError(CutoffLabError, ArithmeticError):
    """A computation failed to reach its certified accuracy."""


# -- chain validation -------------------------------------------------------

class ChainFormatError(InputError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NotSquare(InputError):
    pass


class RowSumError(InputError):
    def __init__(self, row, total):
        self.row = row
        self.total = total
        super().__init__(f"row {row} sums to {total!r}, off from 1 by {abs(total - 1):.3e}")


class NegativeEntry(InputError):
    def __init__(self, row, col, value):
        self.pair = (row, col)
        self.value = value
        super().__init__(f"negative entry K({row},{col}) = {value!r}")


class NonFiniteEntry(InputError):
    def __init__(self, row, col):
        self.pair = (row, col)
        super().__init__(f"non-finite entry at ({row},{col})")


class AsymmetricSupport(InputError):
    def __init__(self, row, col):
        self.pair = (row, col)
        super().__init__(f"asymmetric support: K({row},{col}) > 0 but K({col},{row}) = 0")


class NotIrreducible(InputError):
    def __init__(self, components):
        self.components = components
        sizes = [len(c) for c in components]
        super().__init__(f"support graph has {len(components)} components (sizes {sizes})")


class NonFiniteValue(InputError):
    pass


class InvalidParams(InputError):
    pass


class GenerationFailed(CutoffLabError):
    pass


# -- numerics ----------------------------------------------------------------

class ToleranceUnreachable(NumericalError):
    pass


class SolveFailed(NumericalError):
    pass


class EigenFailed(NumericalError):
    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class TooLargeForExact(InputError):
    pass


class ZeroMassState(NumericalError):
    def __init__(self, origin, state, mass):
        self.origin = origin
        self.state = state
        self.mass = mass
        super().__init__(
            f"P_t({origin},{state}) = {mass:.3e} is below the certified tolerance; "
            "log ratio undefined (raise t)"
        )


class BracketFailed(NumericalError):
    pass


class DegenerateThreshold(InputError):
    pass
