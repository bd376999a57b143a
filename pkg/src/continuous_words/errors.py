"""Exception types shared across the package."""


class ContinuousWordsError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(ContinuousWordsError):
    """Invalid configuration value (bad dimension, unknown target layer, ...)."""


class DomainViolationError(ContinuousWordsError):
    """An attribute value falls outside its declared domain."""

    def __init__(self, attribute: str, value: float, domain_min: float, domain_max: float):
        self.attribute = attribute
        self.value = value
        self.domain_min = domain_min
        self.domain_max = domain_max
        super().__init__(
            f"value {value!r} for attribute {attribute!r} is outside "
            f"[{domain_min}, {domain_max}]"
        )


class TemplateParseError(ContinuousWordsError):
    """A prompt template could not be parsed."""

    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} (at position {position})")


class PromptLengthError(ContinuousWordsError):
    """A tokenized prompt exceeds the backbone's maximum sequence length."""


class StageViolationError(ContinuousWordsError):
    """A training batch violates the contract of the current stage."""


class DataError(ContinuousWordsError):
    """A manifest or sample record is invalid or unreadable."""


class CheckpointError(ContinuousWordsError):
    """A checkpoint archive is missing, corrupt, or incompatible."""
