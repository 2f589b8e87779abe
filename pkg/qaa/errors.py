"""
QAA Errors
Exception hierarchy shared by the library and the CLI exit-code contract.
"""


def _rebuild(cls, message, state):
    error = cls.__new__(cls)
    Exception.__init__(error, message)
    error.__dict__.update(state)
    return error


class QaaError(Exception):
    """Base class; `exit_code` is what the CLI returns for it."""
    exit_code = 3

    def __reduce__(self):
        # subclass __init__ signatures differ from args
        return _rebuild, (type(self), str(self), dict(self.__dict__))


class InvalidArgumentError(QaaError, ValueError):
    exit_code = 2


class ResourceLimitError(QaaError):
    def __init__(self, what, required_bytes, budget_bytes):
        self.required_bytes = int(required_bytes)
        self.budget_bytes = int(budget_bytes)
        super().__init__(
            f"{what} needs {self.required_bytes} bytes, budget is {self.budget_bytes} bytes")


class NumericalError(QaaError):
    exit_code = 3


class NonConvergenceError(NumericalError):
    def __init__(self, message, steps=None, residuals=None):
        self.steps = steps
        self.residuals = residuals
        super().__init__(message)


class IntegrationQualityError(NumericalError):
    def __init__(self, norm_drift, limit):
        self.norm_drift = norm_drift
        super().__init__(f"norm drift {norm_drift:.3e} exceeds {limit:.1e}")


class SamplingError(NumericalError):
    pass


class MeanFieldError(NumericalError):
    pass


class CampaignError(NumericalError):
    def __init__(self, message, partial=None):
        self.partial = partial
        super().__init__(message)


class PersistenceError(QaaError):
    exit_code = 4
