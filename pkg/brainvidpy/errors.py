"""
### errors.py
#### Classes:
    - BrainVidError and one subclass per failure the pipeline can report.

Every error carries an `exit_code` used by the command line.
"""


class BrainVidError(Exception):
    """Base class of every error raised by brainvidpy."""

    exit_code = 1


class RejectedInputError(BrainVidError, ValueError):
    """Input array holds non-finite values or is otherwise unusable."""


class EmptyInputError(BrainVidError, ValueError):
    """Fewer items than the operation needs."""


class InvalidWindowError(BrainVidError, ValueError):
    """Window too short for the requested augmentation."""


class NumericalError(BrainVidError, ArithmeticError):
    """Linear algebra precondition failed (e.g. rank-deficient projection)."""


class ArchiveFormatError(BrainVidError, ValueError):
    """File is not a tensor archive."""


class ArchiveCorruptionError(BrainVidError, ValueError):
    """Archive header or payload is truncated or inconsistent."""


class ArchiveValidationError(BrainVidError, ValueError):
    """Archive content violates the naming or shape rules."""


class GenerationError(BrainVidError, ValueError):
    """Synthetic scene geometry is infeasible."""


class DegenerateBatchError(BrainVidError, ValueError):
    """Contrastive batch has fewer than two rows."""


class UndefinedRoiError(BrainVidError, ValueError):
    """ROI mask selects no voxel."""


class ClassifierGateError(BrainVidError):
    """Stand-in classifier did not reach the accuracy required before use."""


class LayerIndexError(BrainVidError, IndexError):
    """Transformer layer index outside [0, L)."""


class TimestepError(BrainVidError, IndexError):
    """Diffusion timestep outside [0, T)."""


class ConfigError(BrainVidError, ValueError):
    """Configuration invalid or inconsistent."""

    exit_code = 2


class DependencyError(BrainVidError):
    """A pipeline stage is missing an upstream artifact."""

    exit_code = 3

    def __init__(self, stage: str, missing: str):
        super().__init__(f"stage '{stage}' has not produced '{missing}'; run it first")
        self.stage = stage
        self.missing = missing


class NumericalAbortError(BrainVidError):
    """Training diverged; `last_good_state` holds the last finite state dict."""

    exit_code = 4

    def __init__(self, message: str, *, step: int, last_good_state: dict | None = None):
        super().__init__(f"{message} (step {step})")
        self.step = step
        self.last_good_state = last_good_state
