"""
Pattern-coupled sparse Bayesian learning
Outer EM loop: E-step by GAMP (or an exact posterior in subclasses), M-step by the
sub-optimal closed-form α update and the closed-form γ update.
"""

import csv
import logging
import time
from dataclasses import dataclass, field, asdict, replace
from typing import Any, Dict, List, Optional

import numpy as np

from .config import ALPHA_CAP, DAMPING_RETRIES, NOISELESS_GAMMA, SolverConfig
from .coupling import NeighborGraph, eta_from_alpha, nu_from_eta, omega_from_moments
from .errors import DimensionError, DivergenceError, DomainError
from .gamp import g_in, gamp_run, write_trace
from .linop import SensingOperator

logger = logging.getLogger(__name__)


@dataclass
class HyperState:
    alpha: np.ndarray
    gamma: float
    a: float = 1.5
    b: float = 1e-6
    c: float = 1.0
    d: float = 1e-6
    beta: float = 1.0

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["alpha"] = self.alpha.tolist()
        return data


@dataclass
class RecoveryReport:
    x_hat: np.ndarray
    phi_hat: np.ndarray
    hyper: HyperState
    outer_iterations: int
    inner_iterations_total: int
    converged: bool
    wall_time: float
    algorithm: str = "pcsbl-gamp"
    trace: List[Dict[str, float]] = field(default_factory=list)

    def to_dict(self, include_arrays: bool = True) -> Dict[str, Any]:
        data = {
            "algorithm": self.algorithm,
            "outer_iterations": self.outer_iterations,
            "inner_iterations_total": self.inner_iterations_total,
            "converged": self.converged,
            "wall_time": self.wall_time,
            "gamma": float(self.hyper.gamma),
            "trace": self.trace,
        }
        if include_arrays:
            data["x_hat"] = self.x_hat.tolist()
            data["phi_hat"] = self.phi_hat.tolist()
            data["hyper"] = self.hyper.to_dict()
        return data


@dataclass
class EStep:
    """Posterior summary handed from the E-step to the M-step"""
    mu: np.ndarray
    phi: np.ndarray
    m2: np.ndarray
    residual_moment: float
    inner_iterations: int = 0
    damping: float = 1.0
    converged: bool = True


# ---- M-step pieces ------------------------------------------------------

def second_moment(r_hat, tau_r, eta) -> np.ndarray:
    """<x_n²> = μ² + φ under the GAMP approximate posterior"""
    mu, phi = g_in(np.asarray(r_hat, dtype=float), np.asarray(tau_r, dtype=float),
                   np.asarray(eta, dtype=float))
    return mu ** 2 + phi


def update_alpha(omega, a: float, b: float, alpha_cap: float = ALPHA_CAP) -> np.ndarray:
    """α_n = (a−1)/(0.5 ω_n + b), capped at alpha_cap"""
    if not a > 1:
        raise DomainError(f"alpha update needs a > 1, got {a}")
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise DomainError("omega must be entrywise >= 0")
    with np.errstate(divide="ignore"):
        alpha = (a - 1.0) / (0.5 * omega + b)
    return np.minimum(alpha, alpha_cap)


def _eta_and_omega_maps(graph: Optional[NeighborGraph], beta: float):
    if graph is None:
        return (lambda alpha: np.asarray(alpha, dtype=float)), (lambda m2: np.asarray(m2, dtype=float))
    return (lambda alpha: eta_from_alpha(graph, alpha, beta)), \
           (lambda m2: omega_from_moments(graph, m2, beta))


def q_alpha_eval(alpha, m2, graph: Optional[NeighborGraph], beta: float, a: float, b: float) -> float:
    """Σ_n (a−1) log α_n − b α_n + ½ log η_n − ½ η_n <x_n²>"""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0):
        raise DomainError("alpha must be entrywise > 0")
    eta = _eta_and_omega_maps(graph, beta)[0](alpha)
    m2 = np.asarray(m2, dtype=float)
    return float(np.sum((a - 1.0) * np.log(alpha) - b * alpha + 0.5 * np.log(eta) - 0.5 * eta * m2))


def q_alpha_gradient(alpha, m2, graph: Optional[NeighborGraph], beta: float, a: float, b: float) -> np.ndarray:
    """∂Q/∂α_n = (a−1)/α_n − b + ½ ν_n − ½ ω_n"""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0):
        raise DomainError("alpha must be entrywise > 0")
    eta_map, omega_map = _eta_and_omega_maps(graph, beta)
    eta = eta_map(alpha)
    nu = 1.0 / eta if graph is None else nu_from_eta(graph, eta, beta)
    return (a - 1.0) / alpha - b + 0.5 * nu - 0.5 * omega_map(m2)


def gamma_from_residual(residual_moment: float, m: int, c: float, d: float) -> float:
    """γ = (M + 2c − 2)/(2d + Σ_m <(y_m − z_m)²>)"""
    return (m + 2.0 * c - 2.0) / (2.0 * d + residual_moment)


def update_gamma(y, mu_z, phi_z, c: float, d: float) -> float:
    y, mu_z, phi_z = (np.asarray(v, dtype=float) for v in (y, mu_z, phi_z))
    if np.any(phi_z <= 0):
        raise DomainError("phi_z must be entrywise > 0")
    return gamma_from_residual(float(np.sum((y - mu_z) ** 2 + phi_z)), y.shape[0], c, d)


def q_gamma_eval(gamma: float, residual_moment: float, m: int, c: float, d: float) -> float:
    """(c−1) log γ − dγ + (M/2) log γ − (γ/2) Σ <(y−z)²>"""
    return (c - 1.0) * np.log(gamma) - d * gamma + 0.5 * m * np.log(gamma) - 0.5 * gamma * residual_moment


def em_alpha_step(m2, graph: Optional[NeighborGraph], beta: float, a: float, b: float,
                  alpha_cap: float = ALPHA_CAP) -> np.ndarray:
    """α update from second moments (GAMP-approximate or exact)"""
    omega = _eta_and_omega_maps(graph, beta)[1](m2)
    return update_alpha(omega, a, b, alpha_cap)


def em_gamma_step(residual_moment: float, m: int, c: float, d: float) -> float:
    return gamma_from_residual(residual_moment, m, c, d)


# ---- Solver ------------------------------------------------------------

class PatternCoupledSBL:
    """EM solver with a GAMP E-step (PCSBL-GAMP)

    graph=None, or beta=0, gives the conventional uncoupled SBL prior.
    """

    algorithm = "pcsbl-gamp"

    def __init__(self, config: Optional[SolverConfig] = None):
        self.config = (config or SolverConfig()).validate()

    def initial_gamma(self, y: np.ndarray) -> float:
        cfg = self.config
        if cfg.gamma_fixed is not None:
            return cfg.gamma_fixed
        if cfg.gamma_init is not None:
            return cfg.gamma_init
        variance = float(np.var(y, ddof=1)) if y.shape[0] > 1 else float(y[0] ** 2)
        if variance <= 0:
            return NOISELESS_GAMMA
        # assumes an initial SNR of about 20 dB
        return 100.0 / variance

    def solve(self, op: SensingOperator, y, graph: Optional[NeighborGraph] = None) -> RecoveryReport:
        cfg = self.config
        y = np.asarray(y, dtype=float)
        if y.shape != (op.m,):
            raise DimensionError(f"y must have length {op.m}, got shape {y.shape}")
        if graph is not None and graph.n != op.n:
            raise DimensionError(f"graph has {graph.n} nodes but the operator has n={op.n}")

        start = time.perf_counter()
        gamma = self.initial_gamma(y)
        logger.info(f"{self.algorithm}: solving m={op.m}, n={op.n}, beta={cfg.beta}, "
                    f"gamma0={gamma:.3e}{' (fixed)' if cfg.gamma_fixed is not None else ''}")

        if not np.any(y):
            logger.warning(f"{self.algorithm}: measurements are all zero; returning x_hat = 0")
            hyper = self._hyper(np.full(op.n, cfg.alpha_cap), gamma)
            return RecoveryReport(x_hat=np.zeros(op.n), phi_hat=1.0 / _prior_precision(graph, hyper),
                                  hyper=hyper, outer_iterations=0, inner_iterations_total=0,
                                  converged=True, wall_time=time.perf_counter() - start,
                                  algorithm=self.algorithm)

        eta_map, _ = _eta_and_omega_maps(graph, cfg.beta)
        alpha = np.full(op.n, float(cfg.alpha_init))
        x_prev = np.zeros(op.n)
        warm = None
        trace = []
        inner_total = 0
        converged = False
        estep = None
        t = 0
        for t in range(1, int(cfg.outer.t_max) + 1):
            eta = eta_map(alpha)
            estep = self._e_step(op, y, eta, gamma, warm, t)
            inner_total += estep.inner_iterations

            alpha = em_alpha_step(estep.m2, graph, cfg.beta, cfg.a, cfg.b, cfg.alpha_cap)
            if cfg.gamma_fixed is None:
                gamma = em_gamma_step(estep.residual_moment, op.m, cfg.c, cfg.d)

            x_hat = estep.mu
            change = _relative_change(x_hat, x_prev)
            trace.append({"t": t, "delta_x": float(np.sum((x_hat - x_prev) ** 2)),
                          "relative_change": change, "gamma": float(gamma),
                          "inner_iterations": estep.inner_iterations, "damping": estep.damping})
            logger.debug(f"{self.algorithm} t={t}: change={change:.3e}, gamma={gamma:.3e}, "
                         f"inner={estep.inner_iterations}")
            if cfg.warm_start:
                warm = x_hat
            x_prev = x_hat
            if change <= cfg.outer.tol:
                # a stalled E-step can also leave x_hat unchanged
                converged = estep.converged
                break

        wall_time = time.perf_counter() - start
        logger.info(f"{self.algorithm}: finished after {t} outer / {inner_total} inner iterations "
                    f"in {wall_time:.2f}s (converged={converged})")
        report = RecoveryReport(x_hat=estep.mu, phi_hat=estep.phi, hyper=self._hyper(alpha, gamma),
                                outer_iterations=t, inner_iterations_total=inner_total,
                                converged=converged, wall_time=wall_time,
                                algorithm=self.algorithm, trace=trace)
        if cfg.trace_path:
            write_outer_trace(cfg.trace_path, trace)
        return report

    def _hyper(self, alpha, gamma) -> HyperState:
        cfg = self.config
        return HyperState(alpha=alpha, gamma=float(gamma), a=cfg.a, b=cfg.b, c=cfg.c, d=cfg.d, beta=cfg.beta)

    def _e_step(self, op: SensingOperator, y: np.ndarray, eta: np.ndarray, gamma: float,
                warm: Optional[np.ndarray], t: int) -> EStep:
        """GAMP E-step, retried with smaller damping when it diverges"""
        inner = self.config.inner
        schedule = [inner.damping] + [rho for rho in DAMPING_RETRIES if rho < inner.damping]
        result = None
        iterations = 0
        for rho in schedule:
            opts = replace(inner, damping=rho, trace_path=None)
            result = gamp_run(op, y, eta, gamma, opts, mu_init=warm)
            iterations += result.iterations
            if inner.trace_path and result.trace:
                write_trace(inner.trace_path, result.trace, extra={"t": t, "damping": rho})
            if not result.diverged:
                state = result.state
                m2 = second_moment(state.r_hat, state.tau_r, eta)
                residual = float(np.sum((y - result.mu_z) ** 2 + result.phi_z))
                return EStep(mu=state.mu_x, phi=state.phi_x, m2=m2, residual_moment=residual,
                             inner_iterations=iterations, damping=rho, converged=result.converged)
            logger.warning(f"{self.algorithm} t={t}: GAMP diverged with damping={rho}, retrying")
        raise DivergenceError(
            f"GAMP diverged at outer iteration {t} for every damping in {schedule}",
            diagnostics={"outer_iteration": t, "damping_schedule": schedule,
                         "last_iterations": result.iterations, "last_delta": result.delta,
                         "gamma": float(gamma)})


def _prior_precision(graph: Optional[NeighborGraph], hyper: HyperState) -> np.ndarray:
    if graph is None:
        return hyper.alpha
    return eta_from_alpha(graph, hyper.alpha, hyper.beta)


def _relative_change(x_new: np.ndarray, x_old: np.ndarray) -> float:
    diff = float(np.linalg.norm(x_new - x_old))
    base = float(np.linalg.norm(x_old))
    if base == 0.0:
        return 0.0 if diff == 0.0 else float("inf")
    return diff / base


def write_outer_trace(path: str, trace: List[Dict[str, float]]):
    if not trace:
        return
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(trace[0]))
        writer.writeheader()
        writer.writerows(trace)


def pcsbl_gamp_solve(op: SensingOperator, y, graph: Optional[NeighborGraph],
                     cfg: Optional[SolverConfig] = None) -> RecoveryReport:
    return PatternCoupledSBL(cfg).solve(op, y, graph)


class ConventionalSBL(PatternCoupledSBL):
    """Uncoupled prior (η = α) with the same GAMP E-step"""

    algorithm = "sbl"

    def __init__(self, config: Optional[SolverConfig] = None):
        super().__init__((config or SolverConfig()).replace(beta=0.0))

    def solve(self, op: SensingOperator, y, graph: Optional[NeighborGraph] = None) -> RecoveryReport:
        return super().solve(op, y, None)


def sbl_gamp_solve(op: SensingOperator, y, cfg: Optional[SolverConfig] = None) -> RecoveryReport:
    return ConventionalSBL(cfg).solve(op, y)
