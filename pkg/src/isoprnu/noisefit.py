"""Blockwise noise statistics and the quadratic variance law.

Flat-field planes are cut into non-overlapping blocks; each block yields an
(intensity, residual variance) point after removal of a least-squares
planar trend.  Fitting  var = A*phi^2 + B*phi + C  recovers A = sigma_k^2
(PRNU factor variance) and B = g (gain), the quantities that tie the noise
law to ISO speed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyResultError, InvalidParameterError, SingularFitError
from .plane import Plane, as_plane

# Blocks whose fitted planar trend spans more than this fraction of full
# scale are not flat enough for the constant-phi variance law.
FLATNESS_RANGE_LIMIT = 0.02

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class StatPoint:
    phi_hat: float
    var_hat: float
    block_origin: tuple[int, int]
    block_size: int


@dataclass(frozen=True)
class QuadraticFit:
    A: float
    B: float
    C: float
    rmse: float
    n_points: int


def estimate_block_stats(plane: Plane, block: int) -> list[StatPoint]:
    """Per-block (mean, detrended variance) over a non-overlapping grid."""
    plane = as_plane(plane)
    if block < 16:
        raise InvalidParameterError("block must be >= 16")
    h, w = plane.shape
    if h < block or w < block:
        raise InvalidParameterError("plane smaller than one block")

    yy, xx = np.mgrid[0:block, 0:block]
    # centered coordinates make the planar design orthogonal
    xc = (xx - xx.mean()).ravel()
    yc = (yy - yy.mean()).ravel()
    sxx = float((xc * xc).sum())
    syy = float((yc * yc).sum())
    n = block * block

    points: list[StatPoint] = []
    for r0 in range(0, h - block + 1, block):
        for c0 in range(0, w - block + 1, block):
            tile = plane[r0 : r0 + block, c0 : c0 + block].ravel()
            mean = float(tile.mean())
            centered = tile - mean
            bx = float((centered * xc).sum()) / sxx
            by = float((centered * yc).sum()) / syy
            trend_range = (abs(bx) + abs(by)) * (block - 1)
            if trend_range > FLATNESS_RANGE_LIMIT:
                continue
            resid = centered - bx * xc - by * yc
            # 3 detrending parameters consumed (mean + two slopes)
            var_hat = float((resid * resid).sum()) / (n - 3)
            points.append(StatPoint(mean, var_hat, (r0, c0), block))
    if not points:
        raise EmptyResultError("no block passed the flatness test")
    return points


def _solve_normal_equations(design: np.ndarray, target: np.ndarray) -> np.ndarray:
    gram = design.T @ design
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise SingularFitError(f"normal-equation condition number {cond:.3g} exceeds {_COND_LIMIT:g}")
    return np.linalg.solve(gram, design.T @ target)


def fit_quadratic(points: list[StatPoint]) -> QuadraticFit:
    """Ordinary least squares for var = A*phi^2 + B*phi + C."""
    if len(points) < 3:
        raise InvalidParameterError("need at least 3 points")
    phi = np.array([p.phi_hat for p in points])
    var = np.array([p.var_hat for p in points])
    if np.unique(phi).size < 3:
        raise SingularFitError("need at least 3 distinct phi values")
    design = np.column_stack([phi * phi, phi, np.ones_like(phi)])
    a, b, c = _solve_normal_equations(design, var)
    resid = var - (a * phi * phi + b * phi + c)
    return QuadraticFit(float(a), float(b), float(c), float(np.sqrt(np.mean(resid**2))), len(points))


def fit_quadratic_fixed_A(points: list[StatPoint], A: float) -> QuadraticFit:
    """Linear OLS in (B, C) with the second-order coefficient held at A."""
    if len(points) < 2:
        raise InvalidParameterError("need at least 2 points")
    phi = np.array([p.phi_hat for p in points])
    var = np.array([p.var_hat for p in points])
    if np.unique(phi).size < 2:
        raise SingularFitError("need at least 2 distinct phi values")
    design = np.column_stack([phi, np.ones_like(phi)])
    target = var - A * phi * phi
    b, c = _solve_normal_equations(design, target)
    resid = target - (b * phi + c)
    return QuadraticFit(float(A), float(b), float(c), float(np.sqrt(np.mean(resid**2))), len(points))


def gain_slope(iso_B_pairs: list[tuple[float, float]]) -> float:
    """OLS slope of log B against log ISO; 1.0 means B tracks gain exactly."""
    if len(iso_B_pairs) < 2:
        raise InvalidParameterError("need at least 2 (iso, B) pairs")
    iso = np.array([p[0] for p in iso_B_pairs], dtype=np.float64)
    b = np.array([p[1] for p in iso_B_pairs], dtype=np.float64)
    if (iso <= 0.0).any() or (b <= 0.0).any():
        raise InvalidParameterError("iso and B values must be strictly positive")
    x = np.log(iso)
    y = np.log(b)
    xc = x - x.mean()
    denom = float((xc * xc).sum())
    if denom == 0.0:
        raise SingularFitError("all ISO values equal")
    return float((xc * (y - y.mean())).sum() / denom)


# -- CSV exports ----------------------------------------------------------------


def write_stat_points_csv(path, points: list[StatPoint]) -> None:
    with open(path, "w", newline="\n") as f:
        f.write("phi,var,block_row,block_col\n")
        for p in points:
            f.write(f"{p.phi_hat:.9g},{p.var_hat:.9g},{p.block_origin[0]},{p.block_origin[1]}\n")


def read_stat_points_csv(path, block_size: int = 0) -> list[StatPoint]:
    data = np.atleast_1d(np.genfromtxt(path, delimiter=",", names=True))
    return [
        StatPoint(float(row["phi"]), float(row["var"]), (int(row["block_row"]), int(row["block_col"])), block_size)
        for row in data
    ]


def write_fit_csv(path, fit: QuadraticFit) -> None:
    with open(path, "w", newline="\n") as f:
        f.write("A,B,C,rmse,n\n")
        f.write(f"{fit.A:.9g},{fit.B:.9g},{fit.C:.9g},{fit.rmse:.9g},{fit.n_points}\n")
