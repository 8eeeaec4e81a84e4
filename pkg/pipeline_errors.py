"""
Pipeline Errors
Exception hierarchy shared by every stage of the benchmark pipeline and the
exit codes the command line maps them to.
"""

from typing import Optional


class PipelineError(Exception):
    """Base class for expected pipeline failures"""

    exit_code = 1


class UsageError(PipelineError):
    """Wrong call: signature mismatch, unknown variant, missing upstream artifact"""

    exit_code = 2


class ConfigurationError(PipelineError, ValueError):
    """Invalid configuration value or bundled asset gap"""

    exit_code = 3


class KnowledgeBaseParseError(PipelineError, ValueError):
    """Source document could not be parsed"""

    exit_code = 3

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        super().__init__(f"{location}{message}")
        self.path = path
        self.line = line


class KnowledgeBaseValidationError(PipelineError, ValueError):
    """Document parsed but violates a knowledge base invariant"""

    exit_code = 3


class ArtifactFormatError(PipelineError, ValueError):
    """Entity, benchmark or manifest file is malformed"""

    exit_code = 3

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        location = f"{path}:{line}: " if path is not None and line is not None else ""
        super().__init__(f"{location}{message}")
        self.path = path
        self.line = line


class NotFoundError(PipelineError, KeyError):
    """Unknown entity, class or question id"""

    exit_code = 3

    def __str__(self):
        return str(self.args[0]) if self.args else "not found"


class UndefinedInputError(PipelineError, ValueError):
    """Operation is undefined for the given input"""

    exit_code = 3


class EndpointError(PipelineError):
    """Model endpoint failed after retries"""

    exit_code = 4


class VariationUnavailable(Exception):
    """A triplet cannot be varied; the caller keeps it as heredity"""


class GenerationSkipped(Exception):
    """A class produced no artificial entity"""

    def __init__(self, class_id: str, reason: str):
        super().__init__(f"{class_id}: {reason}")
        self.class_id = class_id
        self.reason = reason


class InsufficientDistractors(Exception):
    """Fewer than three distractors exist for a multiple-choice question"""
