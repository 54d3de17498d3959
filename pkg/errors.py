"""Exceptions raised across the toolkit."""


class HeavyMinError(Exception):
    """Base class for every error the toolkit raises on purpose."""


class ConfigError(HeavyMinError, ValueError):
    """Configuration could not be read or is inconsistent."""


class HypothesisViolation(HeavyMinError, ValueError):
    """A parameter hypothesis of a construction or example does not hold."""

    def __init__(self, hypothesis: str, detail: str = ''):
        self.hypothesis = hypothesis
        message = f'hypothesis violated: {hypothesis}'
        if detail:
            message += f' ({detail})'
        super().__init__(message)


class InadmissibleRiskError(HeavyMinError, ValueError):
    """A function is not the risk function of any distribution."""


class BoundedSupportError(InadmissibleRiskError):
    """The tail reaches zero at a finite point."""


class HorizonError(HeavyMinError, ValueError):
    """A request reaches past the horizon a plan was built to."""

    def __init__(self, message: str, required_risk=None):
        self.required_risk = required_risk
        super().__init__(message)


class CheckFailure(HeavyMinError):
    """One or more verification checks failed."""

    def __init__(self, failures):
        self.failures = list(failures)
        super().__init__('; '.join(self.failures) or 'verification failed')
