"""
GAMP engine for a Gaussian prior with per-coefficient precision η and a
Gaussian likelihood with noise precision γ
"""

import csv
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .config import DIVERGENCE_GROWTH, DIVERGENCE_RESIDUAL_FACTOR, VARIANCE_FLOOR, InnerConfig
from .errors import DimensionError, DomainError
from .linop import SensingOperator

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ("k", "delta", "residual_norm")


def _require_positive(value, name: str):
    if np.any(np.asarray(value) <= 0):
        raise DomainError(f"{name} must be > 0")


def g_in(r_hat, tau_r, eta) -> Tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance of x_n under N(0, 1/η) given the message N(r̂, τʳ)"""
    _require_positive(tau_r, "tau_r")
    if np.any(np.asarray(eta) < 0):
        raise DomainError("eta must be >= 0")
    shrink = 1.0 + eta * tau_r
    return r_hat / shrink, tau_r / shrink


def g_out(p_hat, tau_p, y, gamma) -> Tuple[np.ndarray, np.ndarray]:
    """ŝ = (μᶻ − p̂)/τᵖ and τˢ = −∂ŝ/∂p̂ for the Gaussian output channel"""
    _require_positive(tau_p, "tau_p")
    _require_positive(gamma, "gamma")
    denom = 1.0 + gamma * tau_p
    return gamma * (y - p_hat) / denom, gamma / denom


def output_posterior(p_hat, tau_p, y, gamma) -> Tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance of z_m = a_mᵀx"""
    _require_positive(tau_p, "tau_p")
    _require_positive(gamma, "gamma")
    denom = 1.0 + gamma * tau_p
    return (tau_p * gamma * y + p_hat) / denom, tau_p / denom


@dataclass
class GampState:
    """Message quantities of one GAMP iteration"""
    mu_x: np.ndarray
    phi_x: np.ndarray
    r_hat: np.ndarray
    tau_r: np.ndarray
    z_hat: np.ndarray
    p_hat: np.ndarray
    tau_p: np.ndarray
    s_hat: np.ndarray
    tau_s: np.ndarray
    k: int = 0

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(getattr(self, name))) for name in
                   ("mu_x", "phi_x", "r_hat", "tau_r", "z_hat", "p_hat", "tau_p", "s_hat", "tau_s"))


@dataclass
class GampResult:
    state: GampState
    converged: bool
    iterations: int
    mu_z: np.ndarray
    phi_z: np.ndarray
    delta: float = float("inf")
    diverged: bool = False
    trace: List[Tuple[int, float, float]] = field(default_factory=list)


def write_trace(path: str, rows, extra: Optional[dict] = None):
    """Append trace rows to a CSV file, writing the header on first use"""
    extra = extra or {}
    columns = list(extra) + list(TRACE_COLUMNS)
    try:
        with open(path, "x", newline="") as f:
            csv.writer(f).writerow(columns)
    except FileExistsError:
        pass
    with open(path, "a", newline="") as f:
        writer = csv.writer(f)
        for row in rows:
            writer.writerow(list(extra.values()) + list(row))


def gamp_run(op: SensingOperator, y, eta, gamma: float, opts: Optional[InnerConfig] = None,
             mu_init=None, phi_init=None) -> GampResult:
    """Run GAMP Steps 1-4 until Σ|Δμˣ|² ≤ ε or k_max iterations

    Starts from ŝ = 0 and, unless warm-started, the prior mean 0 and variance 1/η.
    A non-finite value or a residual far beyond ||y|| stops the loop, and the last
    finite state is returned flagged diverged. Reaching k_max with the mean change
    grown well past its smallest value is flagged the same way.
    """
    opts = opts or InnerConfig()
    opts.validate()
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if y.shape != (op.m,):
        raise DimensionError(f"y must have length {op.m}, got shape {y.shape}")
    if eta.shape != (op.n,):
        raise DimensionError(f"eta must have length {op.n}, got shape {eta.shape}")
    _require_positive(eta, "eta")
    _require_positive(gamma, "gamma")

    epsilon = opts.epsilon_for(op.n)
    rho = opts.damping
    residual_limit = DIVERGENCE_RESIDUAL_FACTOR * max(float(np.linalg.norm(y)), VARIANCE_FLOOR)

    mu = np.zeros(op.n) if mu_init is None else np.array(mu_init, dtype=float)
    phi = 1.0 / eta if phi_init is None else np.array(phi_init, dtype=float)
    s_hat = np.zeros(op.m)
    state = GampState(mu_x=mu, phi_x=phi, r_hat=mu.copy(), tau_r=phi.copy(),
                      z_hat=np.zeros(op.m), p_hat=np.zeros(op.m), tau_p=np.ones(op.m),
                      s_hat=s_hat, tau_s=np.zeros(op.m), k=0)

    converged = False
    diverged = False
    delta = float("inf")
    min_delta = float("inf")
    trace = []
    k = 0
    for k in range(1, int(opts.k_max) + 1):
        # Step 1
        z_hat = op.apply(mu)
        residual_norm = float(np.linalg.norm(y - z_hat))
        if residual_norm > residual_limit:
            logger.warning(f"GAMP residual {residual_norm:.3e} ran past {residual_limit:.3e} "
                           f"at iteration {k} (damping={rho})")
            diverged = True
            k -= 1
            break
        tau_p = np.maximum(op.apply_sq(phi), VARIANCE_FLOOR)
        p_hat = z_hat - tau_p * s_hat
        # Step 2
        s_new, tau_s = g_out(p_hat, tau_p, y, gamma)
        if rho < 1.0:
            s_new = rho * s_new + (1.0 - rho) * s_hat
        # Step 3
        tau_r = 1.0 / np.maximum(op.apply_sq_adjoint(tau_s), VARIANCE_FLOOR)
        r_hat = mu + tau_r * op.apply_adjoint(s_new)
        # Step 4
        mu_new, phi_new = g_in(r_hat, tau_r, eta)
        if rho < 1.0:
            mu_new = rho * mu_new + (1.0 - rho) * mu

        candidate = GampState(mu_x=mu_new, phi_x=phi_new, r_hat=r_hat, tau_r=tau_r,
                              z_hat=z_hat, p_hat=p_hat, tau_p=tau_p,
                              s_hat=s_new, tau_s=tau_s, k=k)
        if not candidate.is_finite() or np.any(phi_new <= 0) or np.any(tau_s <= 0):
            logger.warning(f"GAMP diverged at iteration {k} (damping={rho})")
            diverged = True
            k -= 1
            break

        delta = float(np.sum((mu_new - mu) ** 2))
        mu, phi, s_hat, state = mu_new, phi_new, s_new, candidate
        min_delta = min(min_delta, delta)
        trace.append((k, delta, residual_norm))
        if delta <= epsilon:
            converged = True
            break

    if state.k == 0:
        # Nothing finite beyond the initialization; output posterior from the prior message
        state.tau_p = np.maximum(op.apply_sq(phi), VARIANCE_FLOOR)
        state.p_hat = op.apply(mu)
    mu_z, phi_z = output_posterior(state.p_hat, state.tau_p, y, gamma)

    if not converged and not diverged and delta > DIVERGENCE_GROWTH * min_delta:
        logger.warning(f"GAMP mean change grew to {delta:.3e} (smallest {min_delta:.3e}) "
                       f"by k_max={opts.k_max} (damping={rho})")
        diverged = True
    elif not converged and not diverged:
        logger.debug(f"GAMP stopped at k_max={opts.k_max} with delta={delta:.3e} > {epsilon:.3e}")
    if opts.trace_path and trace:
        write_trace(opts.trace_path, trace)
    return GampResult(state=state, converged=converged, iterations=k, mu_z=mu_z, phi_z=phi_z,
                      delta=delta, diverged=diverged, trace=trace)
