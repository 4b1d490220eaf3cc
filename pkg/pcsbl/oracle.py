"""
Exact-posterior reference: the O(N³) matrix-inverse E-step and the PCSBL-EM solver
built on it. Used for equivalence tests and the runtime comparison.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .config import ORACLE_MAX_N, SolverConfig
from .coupling import NeighborGraph
from .errors import DimensionError, DomainError, FactorizationError
from .linop import SensingOperator
from .solver import EStep, PatternCoupledSBL, RecoveryReport

logger = logging.getLogger(__name__)


@dataclass
class ExactPosterior:
    mu: np.ndarray
    sigma: np.ndarray


def dense_matrix(op: SensingOperator) -> np.ndarray:
    if op.kind != "dense":
        logger.warning(f"Materializing {op.kind} operator ({op.m}x{op.n}) for the exact posterior")
    return op.to_dense(limit=ORACLE_MAX_N)


def exact_posterior(op: SensingOperator, y, eta, gamma: float, matrix: Optional[np.ndarray] = None) -> ExactPosterior:
    """Σ = (γAᵀA + D)⁻¹ and μ = γΣAᵀy via a Cholesky factorization"""
    A = dense_matrix(op) if matrix is None else matrix
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if y.shape != (op.m,) or eta.shape != (op.n,):
        raise DimensionError(f"expected y of length {op.m} and eta of length {op.n}, "
                             f"got {y.shape} and {eta.shape}")
    if np.any(eta <= 0) or not gamma > 0:
        raise DomainError("eta and gamma must be > 0")

    precision = gamma * (A.T @ A)
    precision[np.diag_indices_from(precision)] += eta
    try:
        factor = scipy.linalg.cho_factor(precision, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise FactorizationError(f"posterior precision is not positive definite: {e}") from e
    mu = scipy.linalg.cho_solve(factor, gamma * (A.T @ y))
    sigma = scipy.linalg.cho_solve(factor, np.eye(op.n))
    sigma = 0.5 * (sigma + sigma.T)
    return ExactPosterior(mu=mu, sigma=sigma)


def residual_moment(A: np.ndarray, y, posterior: ExactPosterior) -> float:
    """Σ_m E[(y_m − a_mᵀx)²] = ‖y − Aμ‖² + tr(AΣAᵀ)"""
    residual = np.asarray(y, dtype=float) - A @ posterior.mu
    return float(residual @ residual + np.sum((A @ posterior.sigma) * A))


class ExactPatternCoupledSBL(PatternCoupledSBL):
    """PCSBL-EM: the same outer loop with the exact Gaussian E-step"""

    algorithm = "pcsbl-em"

    def solve(self, op: SensingOperator, y, graph: Optional[NeighborGraph] = None) -> RecoveryReport:
        self._matrix = dense_matrix(op)
        try:
            return super().solve(op, y, graph)
        finally:
            self._matrix = None

    def _e_step(self, op, y, eta, gamma, warm, t) -> EStep:
        posterior = exact_posterior(op, y, eta, gamma, matrix=self._matrix)
        variance = np.diag(posterior.sigma).copy()
        return EStep(mu=posterior.mu, phi=variance, m2=posterior.mu ** 2 + variance,
                     residual_moment=residual_moment(self._matrix, y, posterior))


def pcsbl_em_solve(op: SensingOperator, y, graph: Optional[NeighborGraph],
                   cfg: Optional[SolverConfig] = None) -> RecoveryReport:
    return ExactPatternCoupledSBL(cfg).solve(op, y, graph)
