"""Counter-based randomness.

Every random quantity in the simulator is a pure function of
(seed, stream, logical index).  Logical index ``i`` maps to Philox counter
block ``i`` (one block = 4 x 64-bit words), so any chunking of a render --
by rows, tiles or threads -- reproduces the exact same bits as a serial
render.  Normals come from the inverse CDF applied to one 64-bit word, a
fixed-consumption scheme (ziggurat would consume a data-dependent number
of words and break counter alignment).
"""

from __future__ import annotations

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ndtri

_WORDS_PER_BLOCK = 4


def raw_words(seed: int, stream: int, start: int, count: int, word: int = 0) -> np.ndarray:
    """64-bit words at logical indices [start, start+count).

    ``word`` selects one of the 4 words inside each counter block, giving up
    to 4 independent values per index.
    """
    if not 0 <= word < _WORDS_PER_BLOCK:
        raise ValueError(f"word must be in [0, {_WORDS_PER_BLOCK})")
    if count == 0:
        return np.empty(0, dtype=np.uint64)
    bg = Philox(key=np.array([seed, stream], dtype=np.uint64))
    bg.advance(int(start))
    blocks = Generator(bg).integers(
        0, 2**64, size=_WORDS_PER_BLOCK * count, dtype=np.uint64, endpoint=False
    )
    return blocks[word::_WORDS_PER_BLOCK]


def uniforms(seed: int, stream: int, start: int, count: int, word: int = 0) -> np.ndarray:
    """Uniforms on the open interval (0, 1), one per logical index."""
    bits = raw_words(seed, stream, start, count, word)
    # 53-bit mantissa, offset by 2^-54 so 0 and 1 are unreachable
    return (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53 + 2.0**-54


def normals(seed: int, stream: int, start: int, count: int, word: int = 0) -> np.ndarray:
    """Standard normals, one per logical index, via the inverse CDF."""
    return ndtri(uniforms(seed, stream, start, count, word))


def normal_field(seed: int, stream: int, shape: tuple[int, int], word: int = 0) -> np.ndarray:
    """2-D field of standard normals; pixel (r, c) owns index r*w + c."""
    h, w = shape
    return normals(seed, stream, 0, h * w, word).reshape(h, w)


# Stream ids; distinct purposes must never share a stream.
STREAM_PRNU = 1
STREAM_EXPOSURE = 2
STREAM_SCENE = 3
