"""Toolkit for 1D lossy coupled cavity arrays: spectrum synthesis,
Hamiltonian recovery from a single reflection measurement, and
thermal-crosstalk calibration of heater-tuned devices."""

from ._version import __version__
from .calibration import (
    CalibrationConfig,
    CalibrationResult,
    HoldoutReport,
    SingleHeaterFit,
    SweepDataset,
    SweepRecord,
    evaluate_holdout,
    fit_model,
    fit_single_heater,
    solve_delta_offsets,
)
from .errors import (
    BrokenChainError,
    CcaError,
    DegenerateSpectrumError,
    GridMarginError,
    InconsistentModesError,
    InsufficientDataError,
    NumericalError,
    ResampleRequiredError,
    SingularFrequencyError,
    UnderdeterminedError,
    ValidationError,
)
from .lattice import (
    SPEED_OF_LIGHT_NM_GHZ,
    EffectiveHamiltonian,
    EigenSystem,
    FrequencyGrid,
    LatticeSpec,
    Spectrum,
    build_hamiltonian,
    eig_complex_symmetric,
    eigen_wavelengths,
    modal_response,
    resolvent_response,
    suggest_grid,
    to_detuning,
    to_wavelength,
)
from .thermal import (
    WINDOW,
    CrosstalkModel,
    OrbitTable,
    crosstalk_ratio,
    mean_hopping_nm,
    normalized_error,
    orbit_table,
    potential_shift,
    predict_eigen_wavelengths,
    single_heater_shift,
)
from .tomography import (
    FitConfig,
    FitReport,
    LorentzianMode,
    LorentzianSum,
    eigenvalues_from_transmission,
    fit_reflection,
    reconstruct,
    seed_modes,
    spectrum_misfit,
    validate_reconstruction,
)
from .virtual import (
    DeviceRanges,
    DeviceTruth,
    NoiseSpec,
    SweepProtocol,
    device_spectrum,
    generate_dataset,
    generate_device,
    linewidth_ghz,
)

__all__ = [name for name in dir() if not name.startswith("_")]
