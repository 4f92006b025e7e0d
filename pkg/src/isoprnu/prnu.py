"""Noise residuals, reference fingerprints and correlation maps.

The residual of an image is image minus its wavelet-Wiener denoised
version; a reference fingerprint is the re-standardized mean of many
standardized flat-field residuals.  Block correlations use the Pearson
form so each block pair is zero-mean unit-scale regardless of upstream
scaling.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import wavelet
from .errors import DegenerateInputError, InvalidParameterError
from .plane import Plane, as_plane

DEFAULT_SIGMA0 = 3.0 / 255.0


@dataclass(frozen=True)
class Residual:
    values: Plane
    standardized: bool = False
    source_iso: float | None = None


@dataclass(frozen=True)
class Fingerprint:
    values: Plane
    n_images: int
    iso_label: float | None = None

    def __post_init__(self):
        if self.n_images < 1:
            raise InvalidParameterError("fingerprint needs at least one source image")


@dataclass(frozen=True)
class CorrelationMap:
    rho: np.ndarray
    block: int
    stride: int
    origin_offset: int = 0
    # blocks where either side had zero variance; their rho is pinned to 0
    degenerate: np.ndarray | None = field(default=None, compare=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rho.shape


def denoise(plane: Plane, sigma0: float = DEFAULT_SIGMA0) -> Plane:
    return wavelet.denoise(plane, sigma0)


def residual(plane: Plane, sigma0: float = DEFAULT_SIGMA0, source_iso: float | None = None) -> Residual:
    plane = as_plane(plane)
    return Residual(plane - wavelet.denoise(plane, sigma0), standardized=False, source_iso=source_iso)


def standardize(res: Residual, zero_mean_rows_cols: bool = False) -> Residual:
    """Zero-mean unit-variance scaling, optionally after row/column mean removal."""
    values = as_plane(res.values)
    if zero_mean_rows_cols:
        values = values - values.mean(axis=1, keepdims=True)
        values = values - values.mean(axis=0, keepdims=True)
    values = values - values.mean()
    std = values.std()
    if std == 0.0 or not np.isfinite(std):
        raise DegenerateInputError("cannot standardize a zero-variance residual")
    return Residual(values / std, standardized=True, source_iso=res.source_iso)


def estimate_fingerprint(
    residuals: list[Residual],
    iso_label: float | None = None,
    zero_mean_rows_cols: bool = True,
    weights: list[Plane] | None = None,
) -> Fingerprint:
    """Mean of standardized residuals, re-standardized.

    ``weights`` switches to maximum-likelihood weighting sum(I*R)/sum(I^2)
    using the source planes I; plain averaging is the flat-field default.
    """
    if not residuals:
        raise InvalidParameterError("need at least one residual")
    shapes = {as_plane(r.values).shape for r in residuals}
    if len(shapes) != 1:
        raise InvalidParameterError(f"residual dimensions disagree: {sorted(shapes)}")
    std_values = [
        r.values if r.standardized else standardize(r, zero_mean_rows_cols).values
        for r in residuals
    ]
    if weights is None:
        mean = np.mean(std_values, axis=0)
    else:
        if len(weights) != len(residuals):
            raise InvalidParameterError("one weight plane per residual required")
        num = np.zeros_like(std_values[0])
        den = np.zeros_like(std_values[0])
        for value, w in zip(std_values, weights):
            w = as_plane(w)
            num += w * value
            den += w * w
        mean = num / np.where(den > 0.0, den, 1.0)
    normalized = standardize(Residual(mean), zero_mean_rows_cols=zero_mean_rows_cols)
    return Fingerprint(normalized.values, n_images=len(residuals), iso_label=iso_label)


def block_corr_map(
    res: Residual,
    fp: Fingerprint,
    block: int,
    stride: int | None = None,
    threads: int = 1,
) -> CorrelationMap:
    """Pearson correlation of co-located blocks between a residual and a fingerprint."""
    if not res.standardized:
        raise InvalidParameterError("residual must be standardized before correlation")
    a = as_plane(res.values)
    b = as_plane(fp.values)
    if a.shape != b.shape:
        raise InvalidParameterError(f"shapes disagree: {a.shape} vs {b.shape}")
    if stride is None:
        stride = block
    if block < 2 or block > min(a.shape):
        raise InvalidParameterError("block must be >= 2 and fit inside the plane")
    if stride < 1:
        raise InvalidParameterError("stride must be >= 1")
    h, w = a.shape
    rows = (h - block) // stride + 1
    cols = (w - block) // stride + 1
    rho = np.zeros((rows, cols))
    degenerate = np.zeros((rows, cols), dtype=bool)

    def corr_row(i: int) -> None:
        r0 = i * stride
        for j in range(cols):
            c0 = j * stride
            x = a[r0 : r0 + block, c0 : c0 + block]
            y = b[r0 : r0 + block, c0 : c0 + block]
            xc = x - x.mean()
            yc = y - y.mean()
            nx = float(np.sqrt((xc * xc).sum()))
            ny = float(np.sqrt((yc * yc).sum()))
            if nx == 0.0 or ny == 0.0:
                degenerate[i, j] = True
                continue
            rho[i, j] = float((xc * yc).sum()) / (nx * ny)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(corr_row, range(rows)))
    else:
        for i in range(rows):
            corr_row(i)
    np.clip(rho, -1.0, 1.0, out=rho)
    return CorrelationMap(rho, block=block, stride=stride, degenerate=degenerate)


def autocorrelation(res: Residual) -> Plane:
    """Normalized circular autocorrelation; lag (0, 0) sits at index [0, 0]."""
    values = as_plane(res.values)
    centered = values - values.mean()
    power = np.abs(np.fft.rfft2(centered)) ** 2
    ac = np.fft.irfft2(power, s=centered.shape)
    if ac[0, 0] <= 0.0:
        raise DegenerateInputError("autocorrelation of a zero-variance residual")
    return ac / ac[0, 0]


def spreading_radius(ac: Plane, tau: float) -> int:
    """Largest Chebyshev lag whose |autocorrelation| exceeds tau, 0 if none."""
    ac = as_plane(ac)
    if tau <= 0.0:
        raise InvalidParameterError("tau must be > 0")
    h, w = ac.shape
    lag_r = np.minimum(np.arange(h), h - np.arange(h))[:, None]
    lag_c = np.minimum(np.arange(w), w - np.arange(w))[None, :]
    cheb = np.maximum(lag_r, lag_c)
    mask = (np.abs(ac) > tau) & (cheb > 0)
    return int(cheb[mask].max()) if mask.any() else 0


# -- fingerprint binary format -------------------------------------------------

_FP_MAGIC = b"PRNU"
_FP_VERSION = 1


def write_fingerprint(path, fp: Fingerprint) -> None:
    values = as_plane(fp.values)
    h, w = values.shape
    iso = float("nan") if fp.iso_label is None else float(fp.iso_label)
    with open(path, "wb") as f:
        f.write(_FP_MAGIC)
        f.write(struct.pack("<B", _FP_VERSION))
        f.write(struct.pack("<III", w, h, fp.n_images))
        f.write(struct.pack("<d", iso))
        f.write(values.astype("<f4").tobytes())


def read_fingerprint(path) -> Fingerprint:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != _FP_MAGIC:
        raise InvalidParameterError("not a fingerprint file (bad magic)")
    version = data[4]
    if version != _FP_VERSION:
        raise InvalidParameterError(f"unsupported fingerprint version {version}")
    w, h, n_images = struct.unpack_from("<III", data, 5)
    (iso,) = struct.unpack_from("<d", data, 17)
    values = np.frombuffer(data, dtype="<f4", count=w * h, offset=25).reshape(h, w)
    return Fingerprint(
        values.astype(np.float64),
        n_images=n_images,
        iso_label=None if np.isnan(iso) else iso,
    )


# -- correlation map exports ---------------------------------------------------


def write_corr_csv(path, cmap: CorrelationMap) -> None:
    with open(path, "w", newline="\n") as f:
        f.write("row,col,rho\n")
        rows, cols = cmap.shape
        for i in range(rows):
            for j in range(cols):
                f.write(f"{i},{j},{cmap.rho[i, j]:.9g}\n")


def read_corr_csv(path, block: int = 128, stride: int | None = None) -> CorrelationMap:
    data = np.genfromtxt(path, delimiter=",", names=True)
    data = np.atleast_1d(data)
    rows = int(data["row"].max()) + 1
    cols = int(data["col"].max()) + 1
    rho = np.zeros((rows, cols))
    rho[data["row"].astype(int), data["col"].astype(int)] = data["rho"]
    return CorrelationMap(rho, block=block, stride=block if stride is None else stride)


def corr_heatmap(cmap: CorrelationMap, floor: float = -0.05) -> Plane:
    """Map rho linearly from [floor, max] onto [0, 1] for 8-bit export."""
    top = float(cmap.rho.max())
    span = top - floor
    if span <= 0.0:
        span = 1.0
    return np.clip((cmap.rho - floor) / span, 0.0, 1.0)
