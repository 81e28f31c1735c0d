"""
Exception types shared by the pipeline modules.

NOTE:
1.Argument errors stay plain ValueError and lookups stay KeyError.
2.Everything here derives from FaderError so the CLI can map it to an exit code.
"""
from typing import List, Optional


class FaderError(Exception):
    """Base class for pipeline errors"""
    exit_code: int = 1


class ConfigurationError(FaderError):
    """Bad config file, tokenizer vocabulary, or environment"""
    exit_code = 2

    def __init__(self, message: str, path: Optional[str] = None) -> None:
        self.path = path
        super().__init__(f"{message} (path: {path})" if path else message)


class TemplateError(FaderError, ValueError):
    """Prompt rendering with missing or unexpected slot bindings"""

    def __init__(self, template_id: str, missing: List[str], extra: List[str]) -> None:
        self.template_id = template_id
        self.missing = missing
        self.extra = extra
        super().__init__(
            f"Template {template_id}: missing slots {missing}, unexpected slots {extra}"
        )


class BackendError(FaderError):
    """LLM backend call failed"""

    def __init__(self, message: str, attempts: int = 1, retryable: bool = True) -> None:
        self.attempts = attempts
        self.retryable = retryable
        super().__init__(f"{message} (attempts: {attempts})")


class RecordError(FaderError, ValueError):
    """A JSONL line that violates its schema"""

    def __init__(self, message: str, path: str, line_number: int) -> None:
        self.path = path
        self.line_number = line_number
        super().__init__(f"{path}:{line_number}: {message}")


class MissingPrerequisiteError(FaderError):
    """An upstream artifact has not been produced yet"""
    exit_code = 3

    def __init__(self, artifact: str, command: str) -> None:
        self.artifact = artifact
        self.command = command
        super().__init__(f"Missing {artifact}; run `fader {command}` first")


class StaleArtifactError(FaderError):
    """Stage outputs were built from different inputs"""
    exit_code = 4

    def __init__(self, stage: str) -> None:
        self.stage = stage
        super().__init__(
            f"Stage {stage} was built from different inputs; rerun with --force"
        )


class UndefinedSimilarityError(FaderError, ValueError):
    """Cosine similarity with a zero vector"""


class EmbeddingProviderError(FaderError):
    """Embedding provider failed on a batch"""

    def __init__(self, message: str, batch_index: int) -> None:
        self.batch_index = batch_index
        super().__init__(f"Embedding batch {batch_index} failed: {message}")
