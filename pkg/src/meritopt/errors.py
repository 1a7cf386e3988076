"""Exception types shared across the package."""


class MeritoptError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(MeritoptError, ValueError):
    """A design point or configuration value violates its contract."""


class TrainingError(MeritoptError):
    """A base learner failed to train (singular solve, divergence, ...)."""


class DatasetError(MeritoptError):
    """A dataset file is missing, corrupted, or inconsistent with the run."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line


class ConfigError(MeritoptError):
    """A campaign config file could not be parsed or is inconsistent."""


class EvaluatorError(MeritoptError):
    """An external evaluator process failed."""


class EvaluationTimeout(EvaluatorError):
    """An external evaluator exceeded its time budget."""


class ProtocolError(EvaluatorError):
    """An evaluator response file is missing or malformed."""


class BatchEvaluationError(EvaluatorError):
    """One or more points in a batch failed to evaluate.

    Successful results are carried in ``completed`` as (index, sample) pairs
    so the caller can persist them before halting.
    """

    def __init__(self, failed_indices, causes, completed):
        first = failed_indices[0]
        super().__init__(
            f"evaluation failed for point index {first}"
            + (f" (and {len(failed_indices) - 1} more)" if len(failed_indices) > 1 else "")
            + f": {causes[0]}"
        )
        self.failed_indices = list(failed_indices)
        self.causes = list(causes)
        self.completed = list(completed)
