"""
CSV, PGM and JSON readers/writers used by the CLI and the benchmark harness
"""

import json
import logging
from typing import Any, Dict

import numpy as np
from PIL import Image, UnidentifiedImageError

from .config import load_json as read_json
from .errors import DataFormatError

logger = logging.getLogger(__name__)

PGM_MAXVAL = 255


def read_vector_csv(path: str) -> np.ndarray:
    """One value per line (a single row is also accepted)"""
    try:
        values = np.loadtxt(path, delimiter=",", dtype=float, ndmin=1)
    except (OSError, ValueError) as e:
        raise DataFormatError(f"Could not read vector CSV {path}: {e}") from e
    if values.ndim != 1:
        if 1 not in values.shape:
            raise DataFormatError(f"{path} holds a {values.shape} table, expected a vector")
        values = values.ravel()
    if not np.all(np.isfinite(values)):
        raise DataFormatError(f"{path} contains non-finite values")
    return values


def write_vector_csv(path: str, values):
    np.savetxt(path, np.asarray(values, dtype=float).reshape(-1, 1), delimiter=",", fmt="%.17g")


def read_matrix_csv(path: str) -> np.ndarray:
    try:
        matrix = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    except (OSError, ValueError) as e:
        raise DataFormatError(f"Could not read matrix CSV {path}: {e}") from e
    if not np.all(np.isfinite(matrix)):
        raise DataFormatError(f"{path} contains non-finite values")
    return matrix


def write_matrix_csv(path: str, matrix):
    np.savetxt(path, np.asarray(matrix, dtype=float), delimiter=",", fmt="%.17g")


def read_pgm(path: str) -> np.ndarray:
    """Read a P2/P5 graymap (maxval 255) as a Q×L array with values in [0, 1]"""
    try:
        with Image.open(path) as img:
            if img.format != "PPM" or img.mode != "L":
                raise DataFormatError(f"{path} is not an 8-bit PGM graymap "
                                      f"(format={img.format}, mode={img.mode})")
            pixels = np.asarray(img, dtype=float)
    except (OSError, ValueError, UnidentifiedImageError, SyntaxError) as e:
        raise DataFormatError(f"Could not read PGM {path}: {e}") from e
    return pixels / PGM_MAXVAL


def write_pgm(path: str, image):
    """Write a Q×L array as binary P5 with maxval 255; values outside [0, 1] saturate"""
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise DataFormatError(f"PGM output needs a 2-D array, got shape {image.shape}")
    outside = int(np.sum((image < 0) | (image > 1)))
    if outside:
        logger.warning(f"Saturating {outside} pixels outside [0, 1] in {path}")
    levels = np.rint(np.clip(image, 0.0, 1.0) * PGM_MAXVAL).astype(np.uint8)
    Image.fromarray(levels).save(path, format="PPM")


def write_json(path: str, data: Dict[str, Any]):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2)


def read_signal(path: str) -> np.ndarray:
    """Signal from CSV or PGM; PGM images are vectorized column-major"""
    if path.lower().endswith((".pgm", ".pnm")):
        return read_pgm(path).ravel(order="F")
    return read_vector_csv(path)
