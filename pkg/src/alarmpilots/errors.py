"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid generation, simulation, or experiment configuration."""


class ValidationError(ValueError):
    """A domain object violates one of its invariants."""


class ParseError(ValueError):
    """Malformed alarm-set or tree text."""


class DeadlineError(ValueError):
    """No tree over the given alarms can meet a requested deadline."""

    def __init__(self, alarm_id: int, message: str):
        super().__init__(message)
        self.alarm_id = alarm_id


class EnumerationLimitError(ValueError):
    """Exhaustive enumeration refused because the instance is too large."""


class VerificationError(AssertionError):
    """A closed-form metric disagreed with exhaustive enumeration.

    Carries enough context to reproduce the failing case.
    """

    def __init__(self, metric: str, instance_seed: int, deviation: float):
        super().__init__(
            f"metric {metric!r} deviates from enumeration by {deviation:.3e} "
            f"on the instance with seed {instance_seed}"
        )
        self.metric = metric
        self.instance_seed = instance_seed
        self.deviation = deviation
