"""Exception types shared across the package."""

from __future__ import annotations


class AlmostConvError(Exception):
    """Base class for all library errors."""


class SignalSyntaxError(AlmostConvError, ValueError):
    """Raised when an expression does not follow the signal grammar.

    Carries the character offset of the offending token and the tokens the
    parser would have accepted there.
    """

    def __init__(self, message: str, position: int = 0, expected: tuple[str, ...] = ()):
        self.position = position
        self.expected = tuple(expected)
        detail = f"{message} at position {position}"
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(detail)


class UnboundedConstruct(AlmostConvError, ValueError):
    """The expression would describe a signal without a finite sup-norm."""


class QuadratureBudgetExceeded(AlmostConvError, RuntimeError):
    """Adaptive refinement ran out of evaluations before meeting ``tol``.

    The best available estimate and its (honest, larger than requested)
    error are attached so callers may still use them.
    """

    def __init__(self, value, err: float, tol: float):
        self.value = value
        self.err = float(err)
        self.tol = float(tol)
        super().__init__(f"quadrature error {err:.3g} exceeds tolerance {tol:.3g}")


class NotADensity(AlmostConvError, ValueError):
    pass


class NonpositiveDilation(AlmostConvError, ValueError):
    pass


class HorizonUnsupported(AlmostConvError, ValueError):
    pass


class InadmissibleKernel(AlmostConvError, ValueError):
    pass


class PreconditionUnmet(AlmostConvError, ValueError):
    pass
