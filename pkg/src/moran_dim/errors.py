"""Exception hierarchy shared by all modules."""


class MoranDimError(Exception):
    """Base class for every error raised by this package."""


class SpecError(MoranDimError, ValueError):
    """An IFS specification is malformed or violates a standing assumption."""


class NonContracting(SpecError):
    pass


class TooFewMaps(SpecError):
    pass


class NotInvariant(SpecError):
    pass


class BudgetExceeded(MoranDimError, RuntimeError):
    """An enumeration grew past its configured cap."""


class BracketFailure(MoranDimError, ArithmeticError):
    pass


class InfeasibleEpsilon(MoranDimError, ValueError):
    pass
