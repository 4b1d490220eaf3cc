"""
Matrix-free sensing operators
Forward, adjoint and entrywise-squared applications for dense, Kronecker (I ⊗ B)
and subsampled sign-randomized Hadamard operators
"""

import logging
from functools import cached_property
from typing import Any, Dict, Optional

import numpy as np
import scipy.linalg

from .config import ORACLE_MAX_N
from .errors import ConfigError, DimensionError, DomainError, RecoveryError
from .rng import make_rng

logger = logging.getLogger(__name__)

KINDS = ("dense", "kronecker", "hadamard")


def _as_vector(x, length: int, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != length:
        raise DimensionError(f"{name} must be a vector of length {length}, got shape {x.shape}")
    return x


def _as_nonneg_vector(x, length: int, name: str) -> np.ndarray:
    x = _as_vector(x, length, name)
    if np.any(x < 0):
        raise DomainError(f"{name} must be entrywise >= 0")
    return x


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def fwht(x) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform in natural (Sylvester) order, O(n log n)"""
    y = np.array(x, dtype=float)
    n = y.shape[0]
    if not is_power_of_two(n):
        raise DimensionError(f"Hadamard transform length must be a power of two, got {n}")
    h = 1
    while h < n:
        y = y.reshape(-1, 2, h)
        y = np.stack((y[:, 0, :] + y[:, 1, :], y[:, 0, :] - y[:, 1, :]), axis=1)
        y = y.reshape(n)
        h *= 2
    return y


class SensingOperator:
    """Linear map R^n -> R^m with the four applications GAMP needs

    Instances are immutable after construction; every apply is pure.
    """

    kind = "abstract"

    def __init__(self, m: int, n: int):
        if m < 1 or n < 1:
            raise ConfigError(f"Operator dims must be >= 1, got m={m}, n={n}")
        self.m = int(m)
        self.n = int(n)

    def apply(self, x) -> np.ndarray:
        return self._apply(_as_vector(x, self.n, "x"))

    def apply_adjoint(self, v) -> np.ndarray:
        return self._apply_adjoint(_as_vector(v, self.m, "v"))

    def apply_sq(self, phi) -> np.ndarray:
        """Σ_n a_mn² φ_n for every row m"""
        return self._apply_sq(_as_nonneg_vector(phi, self.n, "phi"))

    def apply_sq_adjoint(self, tau) -> np.ndarray:
        """Σ_m a_mn² τ_m for every column n"""
        return self._apply_sq_adjoint(_as_nonneg_vector(tau, self.m, "tau"))

    def to_dense(self, limit: Optional[int] = ORACLE_MAX_N) -> np.ndarray:
        if limit is not None and self.n > limit:
            raise ConfigError(f"Refusing to materialize a {self.kind} operator with n={self.n} > {limit}")
        return self._to_dense()

    def describe(self) -> Dict[str, Any]:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(m={self.m}, n={self.n})"

    # subclasses
    def _apply(self, x):
        raise NotImplementedError

    def _apply_adjoint(self, v):
        raise NotImplementedError

    def _apply_sq(self, phi):
        raise NotImplementedError

    def _apply_sq_adjoint(self, tau):
        raise NotImplementedError

    def _to_dense(self):
        return np.column_stack([self._apply(e) for e in np.eye(self.n)])


class DenseOperator(SensingOperator):
    """Explicit m×n matrix stored row-major"""

    kind = "dense"

    def __init__(self, matrix, seed: Optional[int] = None, normalize_columns: bool = False):
        matrix = np.array(matrix, dtype=float, order="C")
        if matrix.ndim != 2:
            raise ConfigError(f"Dense operator needs a 2-D matrix, got shape {matrix.shape}")
        super().__init__(*matrix.shape)
        matrix.setflags(write=False)
        self.matrix = matrix
        self.seed = seed
        self.normalize_columns = normalize_columns

    @cached_property
    def squared(self) -> np.ndarray:
        # Materialized on the first variance step
        sq = self.matrix ** 2
        sq.setflags(write=False)
        return sq

    def _apply(self, x):
        return self.matrix @ x

    def _apply_adjoint(self, v):
        return self.matrix.T @ v

    def _apply_sq(self, phi):
        return self.squared @ phi

    def _apply_sq_adjoint(self, tau):
        return self.squared.T @ tau

    def _to_dense(self):
        return np.array(self.matrix)

    def describe(self) -> Dict[str, Any]:
        if self.seed is not None:
            return {"kind": "dense", "m": self.m, "n": self.n, "seed": self.seed,
                    "normalize_columns": self.normalize_columns}
        return {"kind": "dense", "m": self.m, "n": self.n, "matrix": self.matrix.tolist()}


class KroneckerOperator(SensingOperator):
    """A = I_L ⊗ B, i.e. A vec(X) = vec(B X) with X of shape Q×L (column-major vec)"""

    kind = "kronecker"

    def __init__(self, block, copies: int, seed: Optional[int] = None, normalize_columns: bool = False):
        block = np.array(block, dtype=float, order="C")
        if block.ndim != 2:
            raise ConfigError(f"Kronecker block must be 2-D, got shape {block.shape}")
        if copies < 1:
            raise ConfigError(f"Kronecker copies must be >= 1, got {copies}")
        block.setflags(write=False)
        self.block = block
        self.copies = int(copies)
        self.rows, self.cols = block.shape
        self.seed = seed
        self.normalize_columns = normalize_columns
        super().__init__(self.rows * self.copies, self.cols * self.copies)

    @cached_property
    def block_squared(self) -> np.ndarray:
        return self.block ** 2

    def _columns(self, x, height):
        return x.reshape((height, self.copies), order="F")

    def _apply(self, x):
        return (self.block @ self._columns(x, self.cols)).ravel(order="F")

    def _apply_adjoint(self, v):
        return (self.block.T @ self._columns(v, self.rows)).ravel(order="F")

    def _apply_sq(self, phi):
        return (self.block_squared @ self._columns(phi, self.cols)).ravel(order="F")

    def _apply_sq_adjoint(self, tau):
        return (self.block_squared.T @ self._columns(tau, self.rows)).ravel(order="F")

    def _to_dense(self):
        return np.kron(np.eye(self.copies), self.block)

    def describe(self) -> Dict[str, Any]:
        desc = {"kind": "kronecker", "copies": self.copies, "rows": self.rows, "cols": self.cols}
        if self.seed is not None:
            desc.update(seed=self.seed, normalize_columns=self.normalize_columns)
        else:
            desc["block"] = self.block.tolist()
        return desc


class HadamardOperator(SensingOperator):
    """A = Φ Ψ S: row selector Φ, Hadamard transform Ψ scaled by 1/√n, ±1 diagonal S

    Every entry has magnitude 1/√n, so the squared applications are rank-one.
    """

    kind = "hadamard"

    def __init__(self, n: int, rows, signs, seed: Optional[int] = None):
        if not is_power_of_two(n):
            raise ConfigError(f"Hadamard sensing needs n to be a power of two, got {n}")
        rows = np.array(rows, dtype=np.int64)
        signs = np.array(signs, dtype=float)
        if rows.ndim != 1 or len(np.unique(rows)) != rows.shape[0] or np.any((rows < 0) | (rows >= n)):
            raise ConfigError("Hadamard row selection must be distinct indices in [0, n)")
        if signs.shape != (n,) or not np.all(np.abs(signs) == 1.0):
            raise ConfigError("Hadamard sign diagonal must be n entries in {-1, +1}")
        super().__init__(rows.shape[0], n)
        rows.setflags(write=False)
        signs.setflags(write=False)
        self.selected_rows = rows
        self.signs = signs
        self.scale = 1.0 / np.sqrt(n)
        self.seed = seed

    def _apply(self, x):
        return self.scale * fwht(self.signs * x)[self.selected_rows]

    def _apply_adjoint(self, v):
        full = np.zeros(self.n)
        full[self.selected_rows] = v
        return self.scale * self.signs * fwht(full)

    def _apply_sq(self, phi):
        return np.full(self.m, self.scale ** 2 * phi.sum())

    def _apply_sq_adjoint(self, tau):
        return np.full(self.n, self.scale ** 2 * tau.sum())

    def _to_dense(self):
        return self.scale * scipy.linalg.hadamard(self.n)[self.selected_rows] * self.signs

    def describe(self) -> Dict[str, Any]:
        desc = {"kind": "hadamard", "m": self.m, "n": self.n}
        if self.seed is not None:
            desc["seed"] = self.seed
        else:
            desc.update(rows=self.selected_rows.tolist(), signs=self.signs.tolist())
        return desc


def _gaussian_matrix(m: int, n: int, seed: int, normalize_columns: bool) -> np.ndarray:
    rng = make_rng(seed)
    matrix = rng.standard_normal((m, n))
    if normalize_columns:
        matrix /= np.linalg.norm(matrix, axis=0)
    return matrix


def make_dense(matrix) -> DenseOperator:
    return DenseOperator(matrix)


def make_gaussian_dense(m: int, n: int, seed: int, normalize_columns: bool = True) -> DenseOperator:
    """i.i.d. standard normal entries, optionally scaled to unit-norm columns"""
    if m < 1 or n < 1:
        raise ConfigError(f"Operator dims must be >= 1, got m={m}, n={n}")
    return DenseOperator(_gaussian_matrix(m, n, seed, normalize_columns),
                         seed=seed, normalize_columns=normalize_columns)


def make_kronecker(block, copies: int) -> KroneckerOperator:
    return KroneckerOperator(block, copies)


def make_gaussian_kronecker(rows: int, cols: int, copies: int, seed: int,
                            normalize_columns: bool = True) -> KroneckerOperator:
    return KroneckerOperator(_gaussian_matrix(rows, cols, seed, normalize_columns), copies,
                             seed=seed, normalize_columns=normalize_columns)


def make_hadamard_sensing(m: int, n: int, seed: int) -> HadamardOperator:
    """m distinct rows drawn uniformly without replacement, signs uniform on {-1, +1}"""
    if not is_power_of_two(n):
        raise ConfigError(f"Hadamard sensing needs n to be a power of two, got {n}")
    if not 1 <= m <= n:
        raise ConfigError(f"Hadamard sensing needs 1 <= m <= n, got m={m}, n={n}")
    rng = make_rng(seed)
    rows = np.sort(rng.choice(n, size=m, replace=False))
    signs = rng.choice(np.array([-1.0, 1.0]), size=n)
    return HadamardOperator(n, rows, signs, seed=seed)


def operator_from_dict(desc: Dict[str, Any]) -> SensingOperator:
    """Rebuild an operator from its JSON descriptor"""
    if not isinstance(desc, dict) or desc.get("kind") not in KINDS:
        raise ConfigError(f"Operator descriptor needs kind in {KINDS}, got {desc!r:.80}")
    kind = desc["kind"]
    try:
        if kind == "dense":
            if "matrix" in desc:
                return DenseOperator(desc["matrix"])
            if "matrix_csv" in desc:
                from .fileio import read_matrix_csv
                return DenseOperator(read_matrix_csv(desc["matrix_csv"]))
            return make_gaussian_dense(int(desc["m"]), int(desc["n"]), int(desc["seed"]),
                                       bool(desc.get("normalize_columns", True)))
        if kind == "kronecker":
            if "block" in desc:
                return KroneckerOperator(desc["block"], int(desc["copies"]))
            return make_gaussian_kronecker(int(desc["rows"]), int(desc["cols"]), int(desc["copies"]),
                                           int(desc["seed"]), bool(desc.get("normalize_columns", True)))
        if "rows" in desc:
            return HadamardOperator(int(desc["n"]), desc["rows"], desc["signs"])
        return make_hadamard_sensing(int(desc["m"]), int(desc["n"]), int(desc["seed"]))
    except KeyError as e:
        raise ConfigError(f"{kind} operator descriptor is missing {e}") from e
    except RecoveryError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Malformed {kind} operator descriptor: {e}") from e


def export_dense_csv(op: SensingOperator, path: str):
    """Write the materialized matrix for cross-checking in other tools"""
    from .fileio import write_matrix_csv
    if op.kind != "dense":
        logger.warning(f"Materializing {op.kind} operator ({op.m}x{op.n}) for CSV export")
    write_matrix_csv(path, op.to_dense())
