"""Content-based inference of ISO speed.

A query image is cut into d x d patches; dark/saturated and highly
textured patches are dropped; each surviving patch is matched by content
(L2 distance between hard-thresholded DCT spectra) against candidate
training sets of known ISO, and votes for the set whose matched patches
have the closest noise variance after low-pass removal.  Majority vote
over patches names the ISO.

The hard threshold is an absolute value on the 0-255 intensity scale, so
unit-scale planes are multiplied by 255 before the DCT.  Per the literal
form of the thresholding rule only coefficients strictly above the
threshold survive; set ``absolute_threshold`` to keep large-magnitude
negative coefficients as well.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .errors import InferenceFailedError, InvalidParameterError
from .plane import Plane
from .predictor import texture_weight

INTENSITY_SCALE = 255.0


@dataclass(frozen=True)
class Patch:
    channels: np.ndarray  # (n_channels, d, d)
    source_image: str
    origin: tuple[int, int]

    def __post_init__(self):
        arr = np.asarray(self.channels, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[None, :, :]
        if arr.ndim != 3 or arr.shape[0] not in (1, 3):
            raise InvalidParameterError("patch must have 1 or 3 channels")
        if arr.shape[1] != arr.shape[2] or arr.shape[1] < 8:
            raise InvalidParameterError("patch must be square with d >= 8")
        object.__setattr__(self, "channels", arr)

    @property
    def size(self) -> int:
        return self.channels.shape[1]

    @property
    def n_channels(self) -> int:
        return self.channels.shape[0]


@dataclass(frozen=True)
class CinfisosParams:
    patch_size: int = 32
    max_query_patches: int = 50          # m least-textured patches kept
    n_similar: int = 5                   # matches pulled from each candidate set
    lambda_dct: float = 13.0315          # absolute threshold on the 0-255 scale
    lambda1: float = 10.0 / 255.0        # dark limit
    lambda2: float = 250.0 / 255.0       # saturation limit
    lambda_tau: float = 0.5              # bad-pixel share that disqualifies a channel
    absolute_threshold: bool = False
    prefilter: bool = True
    prefilter_width: float = 0.1         # mean-intensity bucket half width


@dataclass
class CandidateSet:
    iso_label: float
    patches: list[Patch]
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.patches:
            raise InvalidParameterError("candidate set must be nonempty")


@dataclass(frozen=True)
class IsoVote:
    votes: dict[float, int]
    winner: float
    query_patch_count: int


# -- patch qualification and texture -------------------------------------------


def qualify_patch(patch: Patch, lambda1: float, lambda2: float, lambda_tau: float) -> bool:
    """A patch survives unless EVERY channel has too many dark/saturated pixels."""
    if lambda1 >= lambda2:
        raise InvalidParameterError("lambda1 must be < lambda2")
    d2 = patch.size * patch.size
    bad_budget = lambda_tau * d2
    for channel in patch.channels:
        bad = np.count_nonzero((channel < lambda1) | (channel > lambda2))
        if bad <= bad_budget:
            return True
    return False


def texture_feature(patch: Patch) -> float:
    """Mean of 1/(1+var5(highpass)) over pixels and channels; 1 = perfectly flat."""
    total = 0.0
    for channel in patch.channels:
        total += float(texture_weight(channel).mean())
    return total / patch.n_channels


def partition_patches(image: np.ndarray, d: int, source_image: str = "query") -> list[Patch]:
    """Non-overlapping d x d grid over an (h, w) or (h, w, 3) image."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise InvalidParameterError("image must be (h, w) or (h, w, 1|3)")
    h, w, _ = arr.shape
    patches = []
    for r0 in range(0, h - d + 1, d):
        for c0 in range(0, w - d + 1, d):
            tile = np.moveaxis(arr[r0 : r0 + d, c0 : c0 + d, :], 2, 0)
            patches.append(Patch(tile.copy(), source_image, (r0, c0)))
    return patches


def select_query_patches(
    image: np.ndarray,
    params: CinfisosParams = CinfisosParams(),
    source_image: str = "query",
) -> list[Patch]:
    """The m least-textured qualified patches (largest texture feature first)."""
    candidates = [
        p
        for p in partition_patches(image, params.patch_size, source_image)
        if qualify_patch(p, params.lambda1, params.lambda2, params.lambda_tau)
    ]
    if len(candidates) < params.max_query_patches:
        warnings.warn(
            f"only {len(candidates)} qualified patches available "
            f"(wanted {params.max_query_patches})",
            stacklevel=2,
        )
    scored = sorted(
        ((texture_feature(p), p) for p in candidates),
        key=lambda item: (-item[0], item[1].origin),
    )
    return [p for _, p in scored[: params.max_query_patches]]


# -- spectra and distances -------------------------------------------------------


def dct_hard_threshold(p_channel: Plane, lambda_dct: float, absolute: bool = False) -> np.ndarray:
    """Orthonormal 2-D DCT with hard thresholding applied to the coefficients."""
    arr = np.asarray(p_channel, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidParameterError("expected a square single-channel patch")
    coeffs = scipy.fft.dctn(arr, norm="ortho")
    keep = np.abs(coeffs) > lambda_dct if absolute else coeffs > lambda_dct
    return np.where(keep, coeffs, 0.0)


def _thresholded_spectra(channels: np.ndarray, params: CinfisosParams) -> np.ndarray:
    """Stacked thresholded DCT spectra of (..., d, d) channels on the 0-255 scale."""
    coeffs = scipy.fft.dctn(channels * INTENSITY_SCALE, axes=(-2, -1), norm="ortho")
    if params.absolute_threshold:
        keep = np.abs(coeffs) > params.lambda_dct
    else:
        keep = coeffs > params.lambda_dct
    return np.where(keep, coeffs, 0.0)


def _lowpass_noise_var(channels: np.ndarray, params: CinfisosParams) -> np.ndarray:
    """var(p - p_lowpass) per channel, where p_lowpass keeps only the
    above-threshold DCT content (variance measured in native [0, 1] units)."""
    spectra = _thresholded_spectra(channels, params)
    lowpass = scipy.fft.idctn(spectra, axes=(-2, -1), norm="ortho") / INTENSITY_SCALE
    diff = channels - lowpass
    return diff.var(axis=(-2, -1))


def patch_distance(p_i: Patch, p_k: Patch, lambda_dct: float | None = None,
                   params: CinfisosParams | None = None) -> float:
    """Sum over channels of the L2 distance between thresholded DCT spectra."""
    if params is None:
        params = CinfisosParams() if lambda_dct is None else CinfisosParams(lambda_dct=lambda_dct)
    elif lambda_dct is not None:
        raise InvalidParameterError("pass either lambda_dct or params, not both")
    if p_i.channels.shape != p_k.channels.shape:
        raise InvalidParameterError("patches must have identical shape")
    a = _thresholded_spectra(p_i.channels, params)
    b = _thresholded_spectra(p_k.channels, params)
    per_channel = np.sqrt(((a - b) ** 2).sum(axis=(-2, -1)))
    return float(per_channel.sum())


def noise_distance(query: Patch, matches: list[Patch], lambda_dct: float | None = None,
                   params: CinfisosParams | None = None) -> float:
    """Sum over channels of |query noise variance - mean match noise variance|."""
    if params is None:
        params = CinfisosParams() if lambda_dct is None else CinfisosParams(lambda_dct=lambda_dct)
    elif lambda_dct is not None:
        raise InvalidParameterError("pass either lambda_dct or params, not both")
    if not matches:
        raise InvalidParameterError("need at least one matched patch")
    qv = _lowpass_noise_var(query.channels, params)
    mv = np.mean([_lowpass_noise_var(m.channels, params) for m in matches], axis=0)
    return float(np.abs(qv - mv).sum())


# -- candidate set index ----------------------------------------------------------


def _set_index(cset: CandidateSet, params: CinfisosParams) -> dict:
    key = (params.lambda_dct, params.absolute_threshold, params.patch_size)
    cached = cset._index.get(key)
    if cached is not None:
        return cached
    stack = np.stack([p.channels for p in cset.patches])  # (n, C, d, d)
    spectra = _thresholded_spectra(stack, params)
    n, c, d, _ = spectra.shape
    index = {
        "spectra": spectra.reshape(n, c, d * d),
        "sq_norms": (spectra.reshape(n, c, d * d) ** 2).sum(axis=2),
        "noise_var": _lowpass_noise_var(stack, params),  # (n, C)
        "means": stack.mean(axis=(1, 2, 3)),
        "sources": np.array([p.source_image for p in cset.patches]),
    }
    cset._index[key] = index
    return index


def _distances_to_set(query: Patch, cset: CandidateSet, params: CinfisosParams) -> np.ndarray:
    index = _set_index(cset, params)
    q = _thresholded_spectra(query.channels, params).reshape(query.n_channels, -1)
    spectra = index["spectra"]
    if spectra.shape[1:] != q.shape:
        raise InvalidParameterError("query and candidate patch geometry disagree")
    sq = index["sq_norms"] - 2.0 * np.einsum("ncd,cd->nc", spectra, q) + (q * q).sum(axis=1)
    return np.sqrt(np.maximum(sq, 0.0)).sum(axis=1)


def _nearest_ids(
    query: Patch,
    cset: CandidateSet,
    n: int,
    params: CinfisosParams,
    exclude_source: str | None,
) -> np.ndarray:
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    ids = np.arange(len(cset.patches))
    index = _set_index(cset, params)
    if exclude_source is not None:
        ids = ids[index["sources"][ids] != exclude_source]
    if ids.size == 0:
        return ids
    if params.prefilter:
        q_mean = float(query.channels.mean())
        near = ids[np.abs(index["means"][ids] - q_mean) <= params.prefilter_width]
        if near.size >= n:
            ids = near
    if ids.size < n:
        warnings.warn(f"candidate set has only {ids.size} usable patches (wanted {n})", stacklevel=2)
    dist = _distances_to_set(query, cset, params)[ids]
    order = np.argsort(dist, kind="stable")[:n]
    return ids[order]


def nearest_patches(
    query: Patch,
    cset: CandidateSet,
    n: int,
    params: CinfisosParams = CinfisosParams(),
    exclude_source: str | None = None,
) -> list[Patch]:
    """The n candidate patches closest in thresholded-DCT distance.

    The mean-intensity prefilter narrows the search to patches within
    prefilter_width of the query mean, falling back to the full set when
    it leaves fewer than n candidates.
    """
    return [cset.patches[i] for i in _nearest_ids(query, cset, n, params, exclude_source)]


def set_distance(
    query: Patch,
    cset: CandidateSet,
    params: CinfisosParams = CinfisosParams(),
    exclude_source: str | None = None,
) -> float:
    """Noise-characteristic distance from a query patch to one candidate set."""
    rows = _nearest_ids(query, cset, params.n_similar, params, exclude_source)
    if rows.size == 0:
        raise InferenceFailedError(f"no usable patches in candidate set {cset.iso_label:g}")
    index = _set_index(cset, params)
    qv = _lowpass_noise_var(query.channels, params)
    mv = index["noise_var"][rows].mean(axis=0)
    return float(np.abs(qv - mv).sum())


def infer_iso(
    query_image: np.ndarray,
    candidate_sets: list[CandidateSet],
    params: CinfisosParams = CinfisosParams(),
    query_source: str = "query",
) -> IsoVote:
    """Majority vote over query patches for the closest-noise candidate set."""
    labels = [float(s.iso_label) for s in candidate_sets]
    if len(labels) < 2 or len(set(labels)) != len(labels):
        raise InvalidParameterError("need >= 2 candidate sets with distinct ISO labels")
    patches = select_query_patches(query_image, params, source_image=query_source)
    if not patches:
        raise InferenceFailedError("no qualified query patches")
    # stable label order so vote ties resolve toward the lower ISO
    ordered = sorted(candidate_sets, key=lambda s: float(s.iso_label))
    votes = {float(s.iso_label): 0 for s in ordered}
    for patch in patches:
        distances = [
            set_distance(patch, cset, params, exclude_source=patch.source_image)
            for cset in ordered
        ]
        best = int(np.argmin(distances))  # argmin takes the first (= lower ISO) on ties
        votes[float(ordered[best].iso_label)] += 1
    winner = max(sorted(votes), key=lambda label: votes[label])
    return IsoVote(votes=votes, winner=winner, query_patch_count=len(patches))


def build_candidate_set(
    images: list[tuple[str, np.ndarray]],
    iso_label: float,
    params: CinfisosParams = CinfisosParams(),
) -> CandidateSet:
    """Qualified patches from a set of same-ISO images (same rule as queries)."""
    patches = []
    for source, image in images:
        for p in partition_patches(image, params.patch_size, source):
            if qualify_patch(p, params.lambda1, params.lambda2, params.lambda_tau):
                patches.append(p)
    return CandidateSet(iso_label=float(iso_label), patches=patches)


# -- persistence ------------------------------------------------------------------


def write_vote_csv(path, vote: IsoVote) -> None:
    with open(path, "w", newline="\n") as f:
        f.write("iso,votes\n")
        for iso in sorted(vote.votes):
            f.write(f"{iso:.9g},{vote.votes[iso]}\n")
        f.write(f"winner,{vote.winner:.9g}\n")


def write_patch_index(path, cset: CandidateSet, source_ids: dict[str, int]) -> None:
    """Binary index: per patch, source id u32, origin row u32, col u32, f_T f64."""
    with open(path, "wb") as f:
        for p in cset.patches:
            f.write(
                struct.pack(
                    "<IIId",
                    source_ids[p.source_image],
                    p.origin[0],
                    p.origin[1],
                    texture_feature(p),
                )
            )


def read_patch_index(path) -> list[tuple[int, int, int, float]]:
    records = []
    record = struct.Struct("<IIId")
    with open(path, "rb") as f:
        data = f.read()
    if len(data) % record.size != 0:
        raise InvalidParameterError("corrupt patch index (truncated record)")
    for offset in range(0, len(data), record.size):
        records.append(record.unpack_from(data, offset))
    return records
