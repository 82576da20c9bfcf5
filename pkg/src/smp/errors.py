"""Exception hierarchy shared by every module of the package."""


class SMPError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(SMPError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ContractError(SMPError, ValueError):
    """An operation was called with arguments violating its precondition."""


class DivisionSupportError(SMPError, ArithmeticError):
    """Numerator is positive where the denominator is zero."""


class NormalizationError(SMPError, ArithmeticError):
    pass


class EnumerationCapError(SMPError):
    pass


class WidthCapError(SMPError):
    pass


class ConstructionError(SMPError):
    pass


class DeterminismError(SMPError):
    pass


class ProposalFailureError(SMPError):
    pass


class EmptyBeliefError(SMPError):
    def __init__(self, vertex):
        self.vertex = vertex
        super().__init__(f"vertex {vertex}: potential is zero on its entire support")


class SupportStarvationError(SMPError):
    def __init__(self, src, dst):
        self.edge = (src, dst)
        super().__init__(
            f"message {src}->{dst} is zero everywhere on its edge support"
        )
