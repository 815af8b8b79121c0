"""Exceptions raised by the kappa-mu relay library."""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested operation."""


class SeriesConvergenceError(ArithmeticError):
    """An infinite series did not reach its tolerance within the term cap."""

    def __init__(self, message: str, terms_used: int, last_value: float):
        super().__init__(message)
        self.terms_used = terms_used
        self.last_value = last_value
