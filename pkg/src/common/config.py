"""Centralized configuration module with environment variable support."""

import os
from dataclasses import dataclass

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


def _get_env_float(key: str, default: float) -> float:
    """Get float from environment variable with default."""
    value = os.getenv(key)
    if value is not None:
        try:
            return float(value)
        except ValueError:
            pass
    return default


def _get_env_int(key: str, default: int) -> int:
    """Get int from environment variable with default."""
    value = os.getenv(key)
    if value is not None:
        try:
            return int(value)
        except ValueError:
            pass
    return default


# =============================================================================
# Worker Settings
# =============================================================================

# Default number of parallel workers for the verification suite
DEFAULT_MAX_WORKERS = _get_env_int("MAX_WORKERS", 4)


# =============================================================================
# Grid Settings
# =============================================================================

# Default analysis grid: geometric, ratio ~1.069
GRID_R_MIN = _get_env_float("GRID_R_MIN", 1e-3)
GRID_R_MAX = _get_env_float("GRID_R_MAX", 1e4)
GRID_COUNT = _get_env_int("GRID_COUNT", 241)


# =============================================================================
# Quadrature Settings
# =============================================================================

QUAD_TOLERANCE = _get_env_float("QUAD_TOLERANCE", 1e-8)

# Integrand evaluations allowed per adaptive call before failing loudly
QUAD_MAX_EVALUATIONS = _get_env_int("QUAD_MAX_EVALUATIONS", 2_000_000)


@dataclass(frozen=True)
class QuadratureConfig:
    """Configuration for adaptive quadrature."""

    tolerance: float = QUAD_TOLERANCE  # absolute error target
    relative_tolerance: float = 1e-10  # relative error target
    max_evaluations: int = QUAD_MAX_EVALUATIONS
    failure_slack: float = 10.0  # warnings raise only if error > slack * requested

    @property
    def subinterval_limit(self) -> int:
        """Subinterval budget for QUADPACK (21-point Gauss-Kronrod per subinterval)."""
        return max(50, self.max_evaluations // 21)


@dataclass(frozen=True)
class GridConfig:
    """Configuration for radial grids and tabulations."""

    r_min: float = GRID_R_MIN
    r_max: float = GRID_R_MAX
    count: int = GRID_COUNT

    # Dense table used for potentials and derived operands
    table_r_min: float = 1e-3
    table_r_max: float = 1e5
    table_count: int = 481
    support_nodes: int = 161  # extra linear nodes across a compact support

    # Volume curves reach further out than the analysis grid
    volume_r_max: float = 1e6
    volume_count: int = 181


@dataclass(frozen=True)
class HalfLaplacianConfig:
    """Configuration for the principal-value half-Laplacian."""

    excision_fraction: float = 0.5  # PV window is [r(1-f), r(1+f)]
    truncation_radius: float = 1e5  # never below truncation_factor * r
    truncation_factor: float = 100.0
    tolerance: float = 1e-10
    diagonal_offset: float = 1e-7  # relative |s-r| below which the Laurent limit is used


@dataclass(frozen=True)
class FitConfig:
    """Configuration for log-log and tail fits."""

    window_fraction: float = 0.4  # trailing share of points used for lim sup estimates
    min_points: int = 8
    min_window: int = 4
    tail_stability: float = 0.1  # max slope spread for a trustworthy tail
    tail_decade: float = 10.0  # tails are fitted on the last decade of samples


@dataclass(frozen=True)
class EntropyConfig:
    """Configuration for volume entropy estimation."""

    divergence_slope_factor: float = 10.0  # diverging if last slope > factor * n
    divergence_growth: float = 0.2  # or slopes grow > 20% per window doubling
    snap_tolerance: float = 0.15  # |h - even integer| allowed for a snap
    log_volume_floor: float = 1.0  # h undefined while log V stays below this
    shell_cutoff: float = 60.0  # shell integrand ignored below exp(-cutoff) of its max


@dataclass(frozen=True)
class DecompositionConfig:
    """Configuration for the polynomial-part decomposition."""

    theta: float = 1e-3  # coefficient significance threshold
    normal_spread: float = 1e-2  # P spread allowed for a normal verdict, relative to 1+max|u|
    bound_growth: float = 0.05  # growth of the fitted lower-bound constant over the tail


@dataclass(frozen=True)
class CompletenessConfig:
    """Configuration for ray-distance completeness classification."""

    margin: float = 0.05  # distance from the critical log exponent -1


QUADRATURE_CONFIG = QuadratureConfig()
GRID_CONFIG = GridConfig()
HALF_LAPLACIAN_CONFIG = HalfLaplacianConfig()
FIT_CONFIG = FitConfig()
ENTROPY_CONFIG = EntropyConfig()
DECOMPOSITION_CONFIG = DecompositionConfig()
COMPLETENESS_CONFIG = CompletenessConfig()
