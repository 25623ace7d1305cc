"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the mathematical domain: bad model, parameter or point."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (solver divergence, non-finite state, ...).

    ``time`` records where along a flow the failure happened, if known.
    """

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time
