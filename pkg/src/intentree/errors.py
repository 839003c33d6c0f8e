"""Exception hierarchy shared across the toolkit.

Validation and data-shape problems map to CLI exit code 1; backend and IO
problems map to exit code 2.
"""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(ToolkitError):
    """Malformed documents, schema violations, bad parameters."""


class DataFormatError(ValidationError):
    """A corpus / report file does not match the documented schema."""


class BackendError(ToolkitError):
    """LLM or restorer backend failed (network, protocol, exhausted script)."""


class AnswerParseError(ToolkitError):
    """A backend reply could not be mapped onto the offered answer options."""


class TreeBuildError(ToolkitError):
    """No viable decision tree within the configured budget."""


class UndefinedMetricError(ValidationError):
    """A statistic is mathematically undefined for the given input."""
