"""Exception hierarchy shared by the simulator and the numerical library."""


class WasepError(Exception):
    """Base class for every error raised by this package."""


class RingBreachError(WasepError):
    """The tagged particle travelled far enough to feel the periodic boundary."""


class UntrackedBondError(WasepError):
    """A check needed a bond current that was not being recorded."""


class TaggedDisabledError(WasepError):
    pass


class SupportError(WasepError):
    """A test function's support does not fit inside the ring window."""


class DomainError(WasepError, ValueError):
    pass


class DegenerateRegimeError(WasepError, ValueError):
    """Parameters for which the requested rate function is not defined."""


class SingularCovarianceError(WasepError):
    pass


class QuadratureError(WasepError):
    pass


class ConfigError(WasepError, ValueError):
    pass
