"""Exception types shared across the engine."""


class SublevError(Exception):
    """Base class for all engine errors."""


class PreconditionNotMet(SublevError):
    """A documented operation precondition failed (e.g. x0 is not a global max)."""


class SampledOutOfDomain(SublevError):
    """A sampled function was evaluated outside its box under the strict policy."""


class CFLViolation(SublevError):
    """The explicit time step exceeds the computed stability limit."""


class PaddingInsufficient(SublevError):
    """Spectral step detected mass reaching the padded boundary band."""


class BudgetExceeded(SublevError):
    """An enumeration cap (e.g. number of control schedules) was exceeded."""


class DegenerateTouch(SublevError):
    """A viscosity probe touched the solution on the domain boundary."""
