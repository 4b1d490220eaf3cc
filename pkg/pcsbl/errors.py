"""
Exception types raised across the recovery toolkit
"""

from typing import Dict, Optional


class RecoveryError(Exception):
    """Base class for every error raised by the toolkit"""


class DimensionError(RecoveryError, ValueError):
    """Array length or shape does not match the operator/graph"""


class DomainError(RecoveryError, ValueError):
    """Input outside its admissible range (negative variance, nonpositive precision, ...)"""


class ConfigError(RecoveryError, ValueError):
    """Malformed solver/experiment config or operator/graph descriptor"""


class DataFormatError(RecoveryError):
    """Unreadable CSV, PGM or JSON input"""


class FactorizationError(RecoveryError):
    """Cholesky factorization of the posterior precision failed"""


class DivergenceError(RecoveryError):
    """GAMP produced non-finite values even after the damping retries"""

    def __init__(self, message: str, diagnostics: Optional[Dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
