"""PRNU forensics toolkit: ISO-dependent correlation modeling, ISO-specific
correlation prediction, content-based ISO inference, and forgery-detection
evaluation on a built-in synthetic sensor."""

from .cinfisos import (
    CandidateSet,
    CinfisosParams,
    IsoVote,
    Patch,
    infer_iso,
    nearest_patches,
    noise_distance,
    patch_distance,
    qualify_patch,
    select_query_patches,
    texture_feature,
)
from .errors import (
    DegenerateInputError,
    EmptyResultError,
    InferenceFailedError,
    InvalidParameterError,
    InvalidSpecError,
    IsoPrnuError,
    NoMatchingPredictorError,
    SingularFitError,
)
from .forgery import (
    DetectorParams,
    ForgerySpec,
    RocPoint,
    detect,
    make_forgery,
    pixel_metrics,
    roc_envelope,
)
from .noisefit import (
    QuadraticFit,
    StatPoint,
    estimate_block_stats,
    fit_quadratic,
    fit_quadratic_fixed_A,
    gain_slope,
)
from .plane import Plane, read_pgm, write_pgm8, write_pgm16
from .predictor import (
    FeatureVector,
    PredictorModel,
    PredictorRegistry,
    extract_features,
    iso_match,
    metrics,
    predict,
    select_predictor,
    train,
)
from .prnu import (
    CorrelationMap,
    Fingerprint,
    Residual,
    autocorrelation,
    block_corr_map,
    denoise,
    estimate_fingerprint,
    residual,
    spreading_radius,
    standardize,
)
from .sensor import (
    Exposure,
    PrnuField,
    Scene,
    SensorProfile,
    bayer_subsample,
    develop,
    gen_prnu_field,
    simulate_exposure,
)

__version__ = "0.1.0"
