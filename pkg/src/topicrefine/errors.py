"""Exception hierarchy shared across the pipeline."""


class TopicRefineError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(TopicRefineError):
    pass


class ParseError(TopicRefineError):
    """Malformed input file (carries line number when known)."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class SchemaError(TopicRefineError):
    pass


class ResponseFormatError(TopicRefineError):
    """LLM response could not be parsed even after the repair pass."""

    def __init__(self, message, raw=None):
        super().__init__(message)
        self.raw = raw


class TransportError(TopicRefineError):
    pass


class TimeoutError_(TopicRefineError):
    pass


class MissingEmbeddingError(TopicRefineError):
    def __init__(self, text):
        super().__init__(f"no embedding recorded for: {text!r}")
        self.text = text


class DomainError(TopicRefineError):
    pass


class NumericError(TopicRefineError):
    pass


class StalenessError(TopicRefineError):
    pass
