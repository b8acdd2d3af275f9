"""Neural speech-tracking toolkit: stimulus features, EEG preprocessing,
boosting-based TRF estimation, attention decoding, and cluster statistics."""

from . import errors, io
from .eeg_prep import (
    DEFAULT_GRID_LABELS,
    DEFAULT_SCALP_LABELS,
    GRID_REFERENCE_LABELS,
    MontageSplit,
    PrepConfig,
    mask_artifacts,
    preprocess_eeg,
    rereference_average,
    rereference_channels,
)
from .errors import (
    ConfigError,
    ConstantChannel,
    DegenerateBasis,
    DegenerateInput,
    DegenerateTest,
    DimensionMismatch,
    InsufficientChannels,
    InsufficientPermutations,
    InsufficientTrials,
    InvalidBand,
    InvalidFilterSpec,
    InvalidRate,
    InvalidSpec,
    InvalidWindow,
    IoError,
    MissingValidation,
    MonoRequired,
    NoInputs,
    NonFiniteInput,
    RateMismatch,
    ToolkitError,
    UndefinedCorrelation,
    UnknownChannel,
    UpsamplingUnsupported,
    WindowTooLong,
)
from .evaluation import (
    DECISION_WINDOWS,
    ClassificationResult,
    CorrelationResult,
    ScanCurve,
    TrialRecord,
    WindowDecision,
    classify_attention,
    classify_trial_windows,
    cross_condition,
    cv_fit_eval,
    loo_models,
    optimal_lag_scan,
    pearson,
)
from .signal_core import (
    EDGE_SECONDS,
    FilterSpec,
    TimeSeries,
    bandpass_filter,
    normalize,
    notch_filter,
    resample,
)
from .stats import (
    PairedTestResult,
    StatResult,
    gaussian_smooth_trf,
    paired_ttest_bh,
    tfce_ttest,
)
from .stim_features import (
    FeatureSeries,
    Spectrogram,
    envelope,
    erb_rate,
    erb_rate_inverse,
    erb_space,
    gammatone_spectrogram,
    onsets,
    prepare_feature,
)
from .synth import (
    CONDITIONS,
    DEFAULT_PEAKS,
    KernelSpec,
    SimConfig,
    SwitchSchedule,
    gen_switch_schedule,
    make_ground_truth_kernel,
    simulate_dataset,
    simulate_trial,
    speech_like_feature,
    subject_kernel,
)
from .trf import (
    BasisSet,
    BoostConfig,
    FitInfo,
    LagGrid,
    TRFKernel,
    expand,
    fit_boosting,
    make_basis,
    predict_forward,
    reconstruct_backward,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
