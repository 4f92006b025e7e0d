"""Synthetic sensor model.

A raw exposure at pixel i is sampled as

    I_i = (1 + k_i) * phi_i + N(0, g*phi_i + g^2*s^2 - g^2*p0)

where k is the multiplicative PRNU field (std sigma_k), phi the expected
output-referred intensity, g the gain (proportional to ISO speed), s the
read-noise level and p0 the pedestal.  Photon counting enters through its
normal approximation, so the blockwise residual variance of a flat scene
converges to  phi^2*sigma_k^2 + g*phi + g^2*s^2 - g^2*p0.

All randomness is counter-based (see rng.py): renders are pure functions
of (inputs, seed) and identical under any parallel chunking.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.fft

from . import rng
from .errors import InvalidParameterError
from .plane import Plane, as_plane

# Weak-signal regime: k*N_t cross terms are dropped from the pixel law,
# which is only defensible while the PRNU factor stays far below 1.
SIGMA_K_LIMIT = 0.1

CLIP_WARN_FRACTION = 0.01


@dataclass(frozen=True)
class SensorProfile:
    """Ground-truth camera parameters driving the simulator."""

    width: int
    height: int
    sigma_k: float
    gain: float
    read_noise: float
    pedestal: float
    eta_bar: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidParameterError("profile dimensions must be >= 1")
        if not 0.0 <= self.sigma_k < SIGMA_K_LIMIT:
            raise InvalidParameterError(
                f"sigma_k={self.sigma_k} outside [0, {SIGMA_K_LIMIT}); "
                "the weak-noise approximation does not hold"
            )
        if self.gain <= 0.0:
            raise InvalidParameterError("gain must be strictly positive")
        if self.eta_bar <= 0.0:
            raise InvalidParameterError("eta_bar must be strictly positive")
        if self.read_noise < 0.0 or self.pedestal < 0.0:
            raise InvalidParameterError("read_noise and pedestal must be >= 0")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidParameterError("seed must fit in 64 unsigned bits")

    def with_gain(self, gain: float) -> "SensorProfile":
        return SensorProfile(
            self.width, self.height, self.sigma_k, gain,
            self.read_noise, self.pedestal, self.eta_bar, self.seed,
        )


@dataclass(frozen=True)
class PrnuField:
    """Multiplicative per-pixel sensitivity deviations (zero mean)."""

    values: Plane
    sigma_k: float


@dataclass(frozen=True)
class Scene:
    """Expected output-referred intensity phi per pixel, all in (0, 1)."""

    phi: Plane

    def __post_init__(self):
        phi = as_plane(self.phi)
        if phi.min() <= 0.0 or phi.max() >= 1.0:
            raise InvalidParameterError("scene phi must lie strictly inside (0, 1)")
        object.__setattr__(self, "phi", phi)

    @staticmethod
    def flat(width: int, height: int, value: float) -> "Scene":
        return Scene(np.full((height, width), float(value)))


@dataclass(frozen=True)
class Exposure:
    """A rendered raw plane plus the fraction of pixels clipped to [0, 1]."""

    plane: Plane
    clip_fraction: float


def gen_prnu_field(width: int, height: int, sigma_k: float, seed: int) -> PrnuField:
    """I.i.d. zero-mean Gaussian PRNU factors with std sigma_k; deterministic in seed."""
    if width < 1 or height < 1:
        raise InvalidParameterError("field dimensions must be >= 1")
    if sigma_k < 0.0:
        raise InvalidParameterError("sigma_k must be >= 0")
    if sigma_k == 0.0:
        return PrnuField(np.zeros((height, width)), 0.0)
    z = rng.normal_field(seed, rng.STREAM_PRNU, (height, width))
    return PrnuField(sigma_k * z, sigma_k)


def simulate_exposure(
    scene: Scene, prnu: PrnuField, profile: SensorProfile, seed: int
) -> Exposure:
    """Render one raw exposure of the scene through the sensor noise model."""
    phi = scene.phi
    k = as_plane(prnu.values)
    if phi.shape != k.shape or phi.shape != (profile.height, profile.width):
        raise InvalidParameterError(
            f"scene {phi.shape}, prnu {k.shape} and profile "
            f"{(profile.height, profile.width)} dimensions must agree"
        )
    g, s, p0 = profile.gain, profile.read_noise, profile.pedestal
    var = g * phi + g * g * s * s - g * g * p0
    if var.min() < 0.0:
        bad = float(phi.flat[int(np.argmin(var))])
        raise InvalidParameterError(
            f"negative noise variance at phi={bad:g}: g^2*p0 exceeds g*phi + g^2*s^2"
        )
    z = rng.normal_field(seed, rng.STREAM_EXPOSURE, phi.shape)
    raw = (1.0 + k) * phi + np.sqrt(var) * z
    clipped = float(np.mean((raw < 0.0) | (raw > 1.0)))
    if clipped > CLIP_WARN_FRACTION:
        warnings.warn(
            f"{clipped:.1%} of pixels clipped; the quadratic variance law "
            "assumes clip-free exposures",
            stacklevel=2,
        )
    return Exposure(np.clip(raw, 0.0, 1.0), clipped)


def develop(raw: Plane, gamma: float, quant_strength: float) -> Plane:
    """Lossy in-camera development: gamma curve + 8x8 DCT coefficient quantization.

    AC coefficient (u, v) is rounded to a multiple of quant_strength*(u+v);
    DC passes through, mirroring the fine DC step of real encoders.  With
    quant_strength=0 the transform path is an exact round trip.
    """
    raw = as_plane(raw)
    if gamma <= 0.0:
        raise InvalidParameterError("gamma must be > 0")
    if quant_strength < 0.0:
        raise InvalidParameterError("quant_strength must be >= 0")
    out = np.power(np.clip(raw, 0.0, 1.0), 1.0 / gamma)
    if quant_strength == 0.0:
        return out
    h, w = out.shape
    pad_h, pad_w = (-h) % 8, (-w) % 8
    padded = np.pad(out, ((0, pad_h), (0, pad_w)), mode="reflect") if pad_h or pad_w else out
    ph, pw = padded.shape
    tiles = padded.reshape(ph // 8, 8, pw // 8, 8)
    coeffs = scipy.fft.dctn(tiles, axes=(1, 3), norm="ortho")
    u = np.arange(8)
    step = quant_strength * (u[:, None] + u[None, :]).astype(np.float64)
    step = step[None, :, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        quantized = np.where(step > 0.0, np.round(coeffs / np.where(step > 0, step, 1.0)) * step, coeffs)
    developed = scipy.fft.idctn(quantized, axes=(1, 3), norm="ortho").reshape(ph, pw)
    return np.clip(developed[:h, :w], 0.0, 1.0)


def bayer_subsample(raw: Plane, row_offset: int, col_offset: int) -> Plane:
    """One CFA site: out[r, c] = raw[2r+row_offset, 2c+col_offset], floor-half dims."""
    raw = as_plane(raw)
    if row_offset not in (0, 1) or col_offset not in (0, 1):
        raise InvalidParameterError("offsets must be 0 or 1")
    h, w = raw.shape
    if h < 2 or w < 2:
        raise InvalidParameterError("plane must be at least 2x2")
    return raw[row_offset::2, col_offset::2][: h // 2, : w // 2].copy()


# -- profile serialization ----------------------------------------------------

_PROFILE_KEYS = ("width", "height", "sigma_k", "gain", "read_noise", "pedestal", "eta_bar", "seed")


def write_profile(path, profile: SensorProfile) -> None:
    with open(path, "w", newline="\n") as f:
        for key in _PROFILE_KEYS:
            value = getattr(profile, key)
            if key in ("width", "height", "seed"):
                f.write(f"{key}={int(value)}\n")
            else:
                f.write(f"{key}={value!r}\n")


def read_profile(path) -> SensorProfile:
    fields: dict[str, str] = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
    missing = [k for k in _PROFILE_KEYS if k not in fields]
    if missing:
        raise InvalidParameterError(f"profile file missing keys: {', '.join(missing)}")
    return SensorProfile(
        width=int(fields["width"]),
        height=int(fields["height"]),
        sigma_k=float(fields["sigma_k"]),
        gain=float(fields["gain"]),
        read_noise=float(fields["read_noise"]),
        pedestal=float(fields["pedestal"]),
        eta_bar=float(fields["eta_bar"]),
        seed=int(fields["seed"]),
    )
