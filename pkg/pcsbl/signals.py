"""
Test-signal generators, noise injection and recovery metrics
"""

import logging
from typing import Optional, Tuple

import numpy as np
import scipy.ndimage
from PIL import Image

from .config import SUCCESS_THRESHOLD
from .errors import ConfigError, DimensionError, DomainError
from .fileio import read_pgm
from .rng import make_rng

logger = logging.getLogger(__name__)

# 8×8 glyph templates; '#' is foreground
LETTER_GLYPHS = {
    "C": ["..####..",
          ".##..##.",
          "##......",
          "##......",
          "##......",
          "##......",
          ".##..##.",
          "..####.."],
    "S": [".#####..",
          "##...##.",
          "##......",
          ".####...",
          "....###.",
          "......##",
          "##...##.",
          ".#####.."],
    "L": ["##......",
          "##......",
          "##......",
          "##......",
          "##......",
          "##......",
          "#######.",
          "#######."],
    "T": ["########",
          "########",
          "...##...",
          "...##...",
          "...##...",
          "...##...",
          "...##...",
          "...##..."],
    "U": ["##....##",
          "##....##",
          "##....##",
          "##....##",
          "##....##",
          "##....##",
          ".##..##.",
          "..####.."],
    "H": ["##....##",
          "##....##",
          "##....##",
          "########",
          "########",
          "##....##",
          "##....##",
          "##....##"],
    "O": ["..####..",
          ".##..##.",
          "##....##",
          "##....##",
          "##....##",
          "##....##",
          ".##..##.",
          "..####.."],
    "Z": ["########",
          "######..",
          ".....##.",
          "....##..",
          "...##...",
          "..##....",
          ".#######",
          "########"],
}

PATCH_SHAPES = ("letters", "strokes") + tuple(LETTER_GLYPHS)


def gen_block_sparse(N: int, K: int, T: int, seed: int) -> np.ndarray:
    """K nonzeros in T maximal runs with random lengths and positions, unit norm

    Run lengths are a uniform composition of K into T positive parts; the slack
    N − K − (T − 1) is spread over the T + 1 gaps by a uniform weak composition,
    and every inner gap gets one extra zero so runs never touch.
    """
    if not 1 <= T <= K <= N:
        raise ConfigError(f"block-sparse signal needs 1 <= T <= K <= N, got N={N}, K={K}, T={T}")
    slack = N - K - (T - 1)
    if slack < 0:
        raise ConfigError(f"cannot place {T} separated blocks with K={K} nonzeros in N={N}")
    rng = make_rng(seed)

    cuts = np.sort(rng.choice(K - 1, size=T - 1, replace=False)) + 1 if T > 1 else np.array([], dtype=int)
    lengths = np.diff(np.concatenate(([0], cuts, [K])))

    bars = np.sort(rng.choice(slack + T, size=T, replace=False))
    gaps = np.diff(np.concatenate(([-1], bars, [slack + T]))) - 1

    x = np.zeros(N)
    values = rng.standard_normal(K)
    position = int(gaps[0])
    offset = 0
    for i, length in enumerate(lengths):
        x[position:position + length] = values[offset:offset + length]
        offset += length
        position += int(length) + 1 + int(gaps[i + 1])
    return x / np.linalg.norm(x)


def count_runs(x: np.ndarray) -> int:
    """Number of maximal runs of nonzeros"""
    support = (np.asarray(x) != 0).astype(np.int8)
    return int(np.sum(np.diff(np.concatenate(([0], support))) == 1))


def _render_glyph(letter: str, Q: int, L: int, rng: np.random.Generator) -> np.ndarray:
    glyph = np.array([[ch == "#" for ch in row] for row in LETTER_GLYPHS[letter]], dtype=np.uint8) * 255
    height = int(rng.integers(max(4, (3 * Q) // 5), Q + 1))
    width = int(rng.integers(max(4, (3 * L) // 5), L + 1))
    scaled = np.array(Image.fromarray(glyph).resize((width, height), resample=Image.NEAREST)) > 0
    top = int(rng.integers(0, Q - height + 1))
    left = int(rng.integers(0, L - width + 1))
    patch = np.zeros((Q, L))
    patch[top:top + height, left:left + width] = scaled
    return patch


def _render_strokes(Q: int, L: int, rng: np.random.Generator) -> np.ndarray:
    patch = np.zeros((Q, L))
    directions = np.array([[0, 1], [1, 0], [0, -1], [-1, 0]])
    for _ in range(int(rng.integers(2, 4))):
        q, l = int(rng.integers(0, Q)), int(rng.integers(0, L))
        heading = int(rng.integers(0, 4))
        for _ in range(int(rng.integers(2, 4))):
            for _ in range(int(rng.integers(3, max(4, min(Q, L) // 2) + 1))):
                patch[q:q + 2, l:l + 2] = 1.0
                dq, dl = directions[heading]
                q = int(np.clip(q + dq, 0, Q - 1))
                l = int(np.clip(l + dl, 0, L - 1))
            heading = (heading + int(rng.choice([-1, 1]))) % 4
    return patch


def gen_patch_2d(shape: str, Q: int, L: int, seed: int) -> np.ndarray:
    """Binary Q×L pattern with stroke-like clusters, vectorized column-major (n = lQ + q)"""
    if Q < 4 or L < 4:
        raise ConfigError(f"patches need Q, L >= 4, got {Q}x{L}")
    if shape not in PATCH_SHAPES:
        raise ConfigError(f"unknown patch shape {shape!r}; choose from {PATCH_SHAPES}")
    rng = make_rng(seed)
    if shape == "strokes":
        patch = _render_strokes(Q, L, rng)
    else:
        letter = shape if shape in LETTER_GLYPHS else str(rng.choice(sorted(LETTER_GLYPHS)))
        patch = _render_glyph(letter, Q, L, rng)
    return vectorize(patch)


def load_patch(path: str, Q: Optional[int] = None, L: Optional[int] = None) -> np.ndarray:
    """Binary pattern from a PGM file (pixels above mid-gray are foreground), vectorized column-major"""
    image = read_pgm(path)
    if (Q is not None and image.shape[0] != Q) or (L is not None and image.shape[1] != L):
        raise DimensionError(f"{path} is {image.shape[0]}x{image.shape[1]}, expected {Q}x{L}")
    return vectorize(image > 0.5)


def vectorize(image: np.ndarray) -> np.ndarray:
    return np.asarray(image, dtype=float).ravel(order="F")


def unvectorize(x: np.ndarray, Q: int, L: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (Q * L,):
        raise DimensionError(f"cannot reshape length {x.shape} into {Q}x{L}")
    return x.reshape((Q, L), order="F")


def largest_cluster(image: np.ndarray) -> int:
    """Size of the largest 4-connected cluster of nonzero pixels"""
    labels, count = scipy.ndimage.label(np.asarray(image) != 0)
    if count == 0:
        return 0
    return int(np.bincount(labels.ravel())[1:].max())


def add_noise(z, snr_db: Optional[float], seed: int) -> Tuple[np.ndarray, float]:
    """y = z + w with σ² = ‖z‖²/(M·10^(snr/10)); snr_db None or inf means noiseless"""
    z = np.asarray(z, dtype=float)
    if snr_db is None or np.isposinf(snr_db):
        return z.copy(), 0.0
    if not np.isfinite(snr_db):
        raise DomainError(f"snr_db must be finite or +inf, got {snr_db}")
    energy = float(z @ z)
    if energy == 0.0:
        raise DomainError("cannot set a finite SNR for an all-zero signal")
    sigma2 = energy / (z.shape[0] * 10.0 ** (snr_db / 10.0))
    rng = make_rng(seed)
    return z + np.sqrt(sigma2) * rng.standard_normal(z.shape[0]), sigma2


def nmse(x, x_hat) -> float:
    """‖x − x̂‖² / ‖x‖²"""
    x = np.asarray(x, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    if x.shape != x_hat.shape:
        raise DimensionError(f"shape mismatch {x.shape} vs {x_hat.shape}")
    energy = float(x @ x)
    if energy == 0.0:
        raise DomainError("NMSE is undefined for a zero reference signal")
    diff = x - x_hat
    return float(diff @ diff) / energy


def success(x, x_hat, threshold: float = SUCCESS_THRESHOLD) -> bool:
    return nmse(x, x_hat) <= threshold
