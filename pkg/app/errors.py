from typing import Optional


class PipelineError(Exception):
    """Base error. Carries the process exit status and a readable detail."""

    exit_status: int = 3

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class UsageError(PipelineError):
    exit_status = 1


class DataValidationError(PipelineError):
    exit_status = 2


class SchemaMismatchError(DataValidationError):
    pass


class CellParseError(DataValidationError):
    def __init__(self, row: int, column: str, value: str, reason: str):
        super().__init__(f"row {row}, column '{column}': {reason} (got {value!r})")
        self.row = row
        self.column = column
        self.value = value


class DegenerateDatasetError(DataValidationError):
    def __init__(self, detail: str, audit=None):
        super().__init__(detail)
        self.audit = audit


class OutOfScopeStageError(DataValidationError):
    def __init__(self, stage: int):
        super().__init__(f"TNM stage {stage} is outside the supported stages {{2, 3}}")
        self.stage = stage


class SpecValidationError(DataValidationError):
    pass


class TrainingError(DataValidationError):
    def __init__(self, detail: str, epoch: Optional[int] = None, iteration: Optional[int] = None):
        if epoch is not None:
            detail = f"{detail} (epoch {epoch})"
        if iteration is not None:
            detail = f"{detail} (elimination iteration {iteration})"
        super().__init__(detail)
        self.epoch = epoch
        self.iteration = iteration


class DimensionMismatchError(DataValidationError):
    def __init__(self, expected: int, got: int, what: str = "features"):
        super().__init__(f"dimension mismatch: expected {expected} {what}, got {got}")
        self.expected = expected
        self.got = got


class InvariantError(PipelineError):
    exit_status = 3
