"""Content-feature correlation predictors and ISO matching rules.

A predictor is an affine regressor from four block features (intensity,
texture, signal flattening, texture-intensity) to the expected intra-class
correlation, trained per ISO speed.  The one-stop rule restricts which
predictor may serve which test ISO: train ISO must lie in
[test/2, 2*test].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import convolve, uniform_filter

from .errors import InvalidParameterError, NoMatchingPredictorError, SingularFitError
from .plane import Plane, as_plane
from .prnu import CorrelationMap

MIN_TRAIN_SAMPLES = 25  # 5 samples per coefficient

_LAPLACIAN = np.array([[0.0, -1.0, 0.0], [-1.0, 4.0, -1.0], [0.0, -1.0, 0.0]])
_FLAT_VAR_LIMIT = 1e-6

_SAT_KNEE = 0.98
_SAT_SCALE = 0.02


@dataclass(frozen=True)
class FeatureVector:
    f_I: float
    f_T: float
    f_S: float
    f_TI: float

    def as_array(self) -> np.ndarray:
        return np.array([self.f_I, self.f_T, self.f_S, self.f_TI])


@dataclass(frozen=True)
class PredictorModel:
    weights: np.ndarray  # bias + 4 feature weights
    training_iso: float
    n_training_blocks: int
    train_rmse: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (5,):
            raise InvalidParameterError("weights must be bias + 4 feature coefficients")
        object.__setattr__(self, "weights", w)
        if self.n_training_blocks < MIN_TRAIN_SAMPLES:
            raise InvalidParameterError(f"need >= {MIN_TRAIN_SAMPLES} training blocks")


@dataclass
class PredictorRegistry:
    models: dict[float, PredictorModel] = field(default_factory=dict)

    def register(self, model: PredictorModel) -> None:
        self.models[float(model.training_iso)] = model

    def isos(self) -> list[float]:
        return sorted(self.models)


def _attenuate(values: np.ndarray) -> np.ndarray:
    """Intensity attenuation: linear up to the saturation knee, then a fast
    Gaussian roll-off (saturated pixels carry almost no PRNU)."""
    over = values > _SAT_KNEE
    out = np.where(
        over,
        _SAT_KNEE * np.exp(-(((values - _SAT_KNEE) / _SAT_SCALE) ** 2)),
        values,
    )
    return out


def _local_var(values: np.ndarray, size: int = 5) -> np.ndarray:
    m1 = uniform_filter(values, size=size, mode="reflect")
    m2 = uniform_filter(values * values, size=size, mode="reflect")
    return np.maximum(m2 - m1 * m1, 0.0)


def texture_weight(block: np.ndarray) -> np.ndarray:
    """Per-pixel 1/(1 + var5(F)) with F the 3x3 Laplacian high-pass."""
    high = convolve(block, _LAPLACIAN, mode="reflect")
    return 1.0 / (1.0 + _local_var(high))


def extract_features(block: Plane) -> FeatureVector:
    block = as_plane(block)
    if min(block.shape) < 32:
        raise InvalidParameterError("feature block must be at least 32x32")
    att = _attenuate(block)
    tex = texture_weight(block)
    flat = _local_var(block) < _FLAT_VAR_LIMIT
    return FeatureVector(
        f_I=float(att.mean()),
        f_T=float(tex.mean()),
        f_S=float(flat.mean()),
        f_TI=float((att * tex).mean()),
    )


def train(samples: list[tuple[FeatureVector, float]], iso: float) -> PredictorModel:
    """OLS fit of rho on [1, f_I, f_T, f_S, f_TI]."""
    if len(samples) < MIN_TRAIN_SAMPLES:
        raise InvalidParameterError(f"need >= {MIN_TRAIN_SAMPLES} samples, got {len(samples)}")
    rho = np.array([r for _, r in samples], dtype=np.float64)
    if (np.abs(rho) > 1.0).any():
        raise InvalidParameterError("rho values must lie in [-1, 1]")
    design = np.column_stack([np.ones(len(samples))] + [np.array([fv.as_array() for fv, _ in samples])])
    gram = design.T @ design
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularFitError(f"feature design is rank deficient (cond {cond:.3g})")
    weights = np.linalg.solve(gram, design.T @ rho)
    resid = rho - design @ weights
    return PredictorModel(
        weights=weights,
        training_iso=float(iso),
        n_training_blocks=len(samples),
        train_rmse=float(np.sqrt(np.mean(resid**2))),
    )


def predict(model: PredictorModel, fv: FeatureVector) -> float:
    """Predicted intra-class correlation, clamped to [0, 1]."""
    raw = float(model.weights[0] + model.weights[1:] @ fv.as_array())
    return min(max(raw, 0.0), 1.0)


def metrics(pred: list[float], actual: list[float]) -> tuple[float, float]:
    """(r^2 floored at 0, rmse)."""
    p = np.asarray(pred, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if p.shape != a.shape or p.ndim != 1 or p.size < 2:
        raise InvalidParameterError("pred and actual must be equal-length with >= 2 points")
    ss_res = float(((a - p) ** 2).sum())
    ss_tot = float(((a - a.mean()) ** 2).sum())
    r2 = 0.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return r2, float(np.sqrt(ss_res / p.size))


def d_stat(rho: float, rho_hat: float) -> float:
    """Misdetection-risk statistic d1 - d2 = 2*rho - rho_hat."""
    return 2.0 * rho - rho_hat


def risk_fraction(cmap: CorrelationMap, predicted: CorrelationMap) -> float:
    """Share of blocks whose d1 - d2 statistic is negative."""
    if cmap.shape != predicted.shape:
        raise InvalidParameterError("correlation and prediction maps must align")
    return float(np.mean(2.0 * cmap.rho - predicted.rho < 0.0))


def iso_match(train_iso: float, test_iso: float) -> bool:
    """One-stop rule: train ISO within [test/2, 2*test], boundaries inclusive."""
    if train_iso <= 0.0 or test_iso <= 0.0:
        raise InvalidParameterError("ISO speeds must be strictly positive")
    return test_iso / 2.0 <= train_iso <= 2.0 * test_iso


def select_predictor(registry: PredictorRegistry, test_iso: float) -> PredictorModel:
    """Closest matching predictor in stops; ties resolve to the lower ISO."""
    if test_iso <= 0.0:
        raise InvalidParameterError("test ISO must be strictly positive")
    candidates = [m for m in registry.models.values() if iso_match(m.training_iso, test_iso)]
    if not candidates:
        nearest = None
        if registry.models:
            nearest = min(
                registry.models,
                key=lambda iso: (abs(math.log2(iso / test_iso)), iso),
            )
        raise NoMatchingPredictorError(test_iso, nearest)
    return min(
        candidates,
        key=lambda m: (abs(math.log2(m.training_iso / test_iso)), m.training_iso),
    )


# -- serialization ----------------------------------------------------------------

_MODEL_KEYS = ("w0", "w1", "w2", "w3", "w4")


def write_model(path, model: PredictorModel) -> None:
    with open(path, "w", newline="\n") as f:
        for key, w in zip(_MODEL_KEYS, model.weights):
            f.write(f"{key}={w:.17g}\n")
        f.write(f"training_iso={model.training_iso:.17g}\n")
        f.write(f"n_training_blocks={model.n_training_blocks}\n")
        f.write(f"train_rmse={model.train_rmse:.17g}\n")


def read_model(path) -> PredictorModel:
    fields: dict[str, str] = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
    try:
        weights = np.array([float(fields[k]) for k in _MODEL_KEYS])
        return PredictorModel(
            weights=weights,
            training_iso=float(fields["training_iso"]),
            n_training_blocks=int(fields["n_training_blocks"]),
            train_rmse=float(fields["train_rmse"]),
        )
    except KeyError as exc:
        raise InvalidParameterError(f"model file missing key {exc}") from exc


def write_samples_csv(path, samples: list[tuple[FeatureVector, float]]) -> None:
    with open(path, "w", newline="\n") as f:
        f.write("f_I,f_T,f_S,f_TI,rho\n")
        for fv, rho in samples:
            f.write(f"{fv.f_I:.9g},{fv.f_T:.9g},{fv.f_S:.9g},{fv.f_TI:.9g},{rho:.9g}\n")


def read_samples_csv(path) -> list[tuple[FeatureVector, float]]:
    data = np.atleast_1d(np.genfromtxt(path, delimiter=",", names=True))
    return [
        (
            FeatureVector(float(r["f_I"]), float(r["f_T"]), float(r["f_S"]), float(r["f_TI"])),
            float(r["rho"]),
        )
        for r in data
    ]
