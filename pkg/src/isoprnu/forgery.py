"""Synthetic forgeries, a Bayes/MRF block detector, and ROC evaluation.

Forgeries replace the center patch of a region with donor content from a
disjoint position of the same image, so the splice carries mismatched
sensor noise but identical development history.  Detection compares each
block's correlation against a tampered model N(0, sigma0^2) and an
authentic model N(rho_hat, sigma1^2), with an Ising smoothness term
minimized by iterated conditional modes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, InvalidSpecError
from .plane import Plane, as_plane
from .prnu import CorrelationMap


@dataclass(frozen=True)
class ForgerySpec:
    region: int = 1024
    patch: int = 256
    donor_offset: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if self.patch >= self.region:
            raise InvalidSpecError("patch must be smaller than the region")
        if self.patch < 1:
            raise InvalidSpecError("patch must be >= 1")


@dataclass(frozen=True)
class DetectorParams:
    beta: float = 10.0
    p0: float = 0.01
    sigma0: float = 1.0 / 128.0   # std of the tampered (zero-mean) correlation model
    sigma1: float = 2.0 / 128.0   # std of the authentic model around rho_hat
    max_icm_iters: int = 100

    def __post_init__(self):
        if self.beta < 0.0:
            raise InvalidParameterError("beta must be >= 0")
        if not 0.0 <= self.p0 <= 1.0:
            raise InvalidParameterError("p0 must lie in [0, 1]")
        if self.sigma0 <= 0.0 or self.sigma1 <= 0.0:
            raise InvalidParameterError("sigma0 and sigma1 must be > 0")
        if self.max_icm_iters < 1:
            raise InvalidParameterError("max_icm_iters must be >= 1")


@dataclass(frozen=True)
class RocPoint:
    fpr: float
    tpr: float
    params: DetectorParams


def make_forgery(image: Plane, spec: ForgerySpec) -> tuple[Plane, Plane]:
    """Replace the center patch of the image's central region with donor content.

    Returns (forged plane, binary truth mask marking replaced pixels).
    """
    image = as_plane(image)
    h, w = image.shape
    if h < spec.region or w < spec.region:
        raise InvalidSpecError(f"image {image.shape} smaller than region {spec.region}")
    reg_r = (h - spec.region) // 2
    reg_c = (w - spec.region) // 2
    tr = reg_r + (spec.region - spec.patch) // 2
    tc = reg_c + (spec.region - spec.patch) // 2
    dr, dc = spec.donor_offset
    if dr < 0 or dc < 0 or dr + spec.patch > h or dc + spec.patch > w:
        raise InvalidSpecError("donor patch does not fit inside the image")
    overlap_r = max(0, min(tr + spec.patch, dr + spec.patch) - max(tr, dr))
    overlap_c = max(0, min(tc + spec.patch, dc + spec.patch) - max(tc, dc))
    if overlap_r > 0 and overlap_c > 0:
        raise InvalidSpecError("donor region overlaps the tampered target")
    forged = image.copy()
    forged[tr : tr + spec.patch, tc : tc + spec.patch] = image[dr : dr + spec.patch, dc : dc + spec.patch]
    truth = np.zeros_like(image)
    truth[tr : tr + spec.patch, tc : tc + spec.patch] = 1.0
    return forged, truth


def _label_energies(rho: np.ndarray, rho_hat: np.ndarray, params: DetectorParams):
    """Per-block negative log posterior terms for authentic (0) / tampered (1)."""
    with np.errstate(divide="ignore"):
        log_p0 = np.log(params.p0)
        log_p1 = np.log1p(-params.p0)
    e_tampered = 0.5 * (rho / params.sigma0) ** 2 + np.log(params.sigma0) - log_p0
    e_authentic = 0.5 * ((rho - rho_hat) / params.sigma1) ** 2 + np.log(params.sigma1) - log_p1
    return e_authentic, e_tampered


def total_energy(labels: np.ndarray, e_auth: np.ndarray, e_tamp: np.ndarray, beta: float) -> float:
    data = np.where(labels == 1, e_tamp, e_auth).sum()
    pair = (labels[1:, :] != labels[:-1, :]).sum() + (labels[:, 1:] != labels[:, :-1]).sum()
    return float(data + beta * pair)


def detect_labels(
    cmap: CorrelationMap, predicted: CorrelationMap, params: DetectorParams
) -> np.ndarray:
    """Block labels (1 = tampered) from the Bayes data term plus ICM smoothing."""
    if cmap.shape != predicted.shape:
        raise InvalidParameterError("correlation and prediction maps must align")
    rho = np.asarray(cmap.rho, dtype=np.float64)
    rho_hat = np.asarray(predicted.rho, dtype=np.float64)
    e_auth, e_tamp = _label_energies(rho, rho_hat, params)
    labels = (e_tamp < e_auth).astype(np.int8)
    if params.beta == 0.0:
        return labels
    rows, cols = labels.shape
    for _ in range(params.max_icm_iters):
        flips = 0
        for i in range(rows):
            for j in range(cols):
                disagree_t = 0
                disagree_a = 0
                for ni, nj in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
                    if 0 <= ni < rows and 0 <= nj < cols:
                        nb = labels[ni, nj]
                        disagree_t += nb != 1
                        disagree_a += nb != 0
                cost_t = e_tamp[i, j] + params.beta * disagree_t
                cost_a = e_auth[i, j] + params.beta * disagree_a
                new = 1 if cost_t < cost_a else 0
                if new != labels[i, j]:
                    labels[i, j] = new
                    flips += 1
        if flips == 0:
            break
    return labels


def paint_mask(
    labels: np.ndarray, block: int, stride: int, out_shape: tuple[int, int]
) -> Plane:
    """Rasterize block labels to pixels; overlapping strides resolve by majority
    of covering blocks (exact half counts as tampered)."""
    votes = np.zeros(out_shape, dtype=np.int32)
    cover = np.zeros(out_shape, dtype=np.int32)
    rows, cols = labels.shape
    for i in range(rows):
        r0 = i * stride
        for j in range(cols):
            c0 = j * stride
            votes[r0 : r0 + block, c0 : c0 + block] += labels[i, j]
            cover[r0 : r0 + block, c0 : c0 + block] += 1
    mask = np.zeros(out_shape)
    covered = cover > 0
    mask[covered] = (2 * votes[covered] >= cover[covered]).astype(np.float64)
    return mask


def detect(
    cmap: CorrelationMap,
    predicted: CorrelationMap,
    params: DetectorParams,
    out_shape: tuple[int, int] | None = None,
) -> Plane:
    """Pixel-level tamper mask (1 = tampered)."""
    labels = detect_labels(cmap, predicted, params)
    if out_shape is None:
        rows, cols = labels.shape
        out_shape = (
            (rows - 1) * cmap.stride + cmap.block,
            (cols - 1) * cmap.stride + cmap.block,
        )
    return paint_mask(labels, cmap.block, cmap.stride, out_shape)


def pixel_metrics(mask: Plane, truth: Plane) -> tuple[float, float]:
    """(TPR, FPR) at the pixel level; empty classes contribute 0."""
    mask = as_plane(mask) > 0.5
    truth = as_plane(truth) > 0.5
    if mask.shape != truth.shape:
        raise InvalidParameterError("mask and truth must have the same shape")
    pos = int(truth.sum())
    neg = truth.size - pos
    tp = int((mask & truth).sum())
    fp = int((mask & ~truth).sum())
    tpr = tp / pos if pos else 0.0
    fpr = fp / neg if neg else 0.0
    return tpr, fpr


def roc_envelope(runs: list[tuple[DetectorParams, float, float]], fpr_limit: float = 0.2) -> list[RocPoint]:
    """Upper-left Pareto front of (fpr, tpr) runs, reported for fpr in [0, fpr_limit]."""
    if not runs:
        return []
    ordered = sorted(runs, key=lambda r: (r[1], -r[2]))
    front: list[RocPoint] = []
    best_tpr = -1.0
    for params, fpr, tpr in ordered:
        if not (0.0 <= fpr <= 1.0 and 0.0 <= tpr <= 1.0):
            raise InvalidParameterError("rates must lie in [0, 1]")
        if tpr > best_tpr:
            front.append(RocPoint(fpr=fpr, tpr=tpr, params=params))
            best_tpr = tpr
    return [p for p in front if p.fpr <= fpr_limit]


def envelope_tpr_at(front: list[RocPoint], fpr: float) -> float:
    """Step interpolation: best tpr achievable at false-positive budget fpr."""
    best = 0.0
    for p in front:
        if p.fpr <= fpr:
            best = max(best, p.tpr)
    return best


def overlay(mask: Plane, truth: Plane) -> np.ndarray:
    """RGB overlay: true detections green, false detections red, misses white."""
    mask = as_plane(mask) > 0.5
    truth = as_plane(truth) > 0.5
    rgb = np.zeros(mask.shape + (3,))
    rgb[mask & truth] = (0.0, 1.0, 0.0)
    rgb[mask & ~truth] = (1.0, 0.0, 0.0)
    rgb[~mask & truth] = (1.0, 1.0, 1.0)
    return rgb


def write_roc_csv(path, runs: list[tuple[DetectorParams, float, float]]) -> None:
    with open(path, "w", newline="\n") as f:
        f.write("beta,p0,fpr,tpr\n")
        for params, fpr, tpr in runs:
            f.write(f"{params.beta:.9g},{params.p0:.9g},{fpr:.9g},{tpr:.9g}\n")


def read_roc_csv(path) -> list[tuple[DetectorParams, float, float]]:
    data = np.atleast_1d(np.genfromtxt(path, delimiter=",", names=True))
    runs = []
    for row in data:
        params = DetectorParams(beta=float(row["beta"]), p0=float(row["p0"]))
        runs.append((params, float(row["fpr"]), float(row["tpr"])))
    return runs
