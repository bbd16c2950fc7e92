"""Exception hierarchy shared across the toolkit.

Every error carries an ``exit_code`` so the command line layer can map
failures onto its documented exit codes (2 = validation, 3 = numerical).
"""


class CcaError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ValidationError(CcaError, ValueError):
    """Invalid input: bad spec, profile, file schema or argument."""

    exit_code = 2


class InsufficientDataError(ValidationError):
    """Not enough samples to perform the requested operation."""


class GridMarginError(ValidationError):
    """Fit grid does not span every resonance plus the required margin."""


class ResampleRequiredError(ValidationError):
    """Two spectra live on different grids and must be resampled first."""


class UnderdeterminedError(ValidationError):
    """Fewer independent measurements than free parameters."""


class NumericalError(CcaError):
    """Numerical failure while evaluating an otherwise valid input."""

    exit_code = 3


class SingularFrequencyError(NumericalError):
    """A probe frequency coincides with a real eigenvalue of a lossless system."""

    def __init__(self, omega, message=None):
        self.omega = float(omega)
        super().__init__(message or f"singular linear solve at detuning {self.omega} GHz")


class DegenerateSpectrumError(NumericalError):
    """A mode failed the unconjugated-normalization conditioning test."""

    def __init__(self, mode_index, message=None):
        self.mode_index = int(mode_index)
        super().__init__(
            message
            or f"quasi-defective eigenmode {self.mode_index}: unconjugated self-product too small"
        )


class BrokenChainError(NumericalError):
    """Site-to-site reconstruction broke down at a vanishing hopping rate."""

    def __init__(self, site, message=None):
        self.site = int(site)
        super().__init__(message or f"reconstruction chain broke at site {self.site}")


class InconsistentModesError(NumericalError):
    """Reconstructed site weights drifted away from unit normalization."""
