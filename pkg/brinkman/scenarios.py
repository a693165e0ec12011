"""
Flow scenarios without closed-form solutions, used by the `solve` command.
"""
import logging
from typing import Optional

import numpy as np

from .assembly import DEFAULT_A_STAR, ProblemData
from .dg_core import QuadratureOrders
from .errors import ConfigError
from .mesh import CHANNEL_BOUNDARY, GEOMETRY_TOL, Mesh, classify_boundary


logger = logging.getLogger(__name__)

# Inclusion field defaults
INCLUSION_SHARPNESS = 800.0
KAPPA_HIGH = 1.0
KAPPA_LOW = 1e-6


def inlet_profile(points: np.ndarray, peak: float = 1.0) -> np.ndarray:
    """Parabolic inflow on x = 0, no-slip elsewhere on the Dirichlet boundary."""
    y = points[..., 1]
    on_inlet = points[..., 0] <= GEOMETRY_TOL
    ux = np.where(on_inlet, 4.0 * peak * y * (1.0 - y), 0.0)
    return np.stack([ux, np.zeros_like(ux)], axis=-1)


def channel_problem(mesh: Mesh, degree: int, mu: float = 1e-3, peak: float = 1.0,
                    a_star: float = DEFAULT_A_STAR, orders: Optional[QuadratureOrders] = None):
    """
    Channel flow through the unit square: parabolic inlet on x = 0, walls on
    y = 0 and y = 1, traction-free outlet on x = 1, no body force.

    Returns:
        (classified mesh, ProblemData)
    """
    mesh = classify_boundary(mesh, CHANNEL_BOUNDARY)
    data = ProblemData(mu=mu, dirichlet=lambda x: inlet_profile(x, peak), a_star=a_star,
                       degree=degree, orders=orders or QuadratureOrders())
    return mesh, data


def zero_problem(degree: int, mu: float = 1e-3, a_star: float = DEFAULT_A_STAR) -> ProblemData:
    """F = G_D = G_N = 0; the discrete solution vanishes."""
    return ProblemData(mu=mu, a_star=a_star, degree=degree)


def inclusions_kappa(count: int = 12, seed: int = 0, kappa_high: float = KAPPA_HIGH,
                     kappa_low: float = KAPPA_LOW, sharpness: float = INCLUSION_SHARPNESS):
    """
    Random low-permeability inclusions:
        kappa(x) = max(kappa_high (1 - sum_i exp(-sharpness |x - q_i|^2)), kappa_low)
    with centres q_i drawn uniformly in the unit square from `seed`.

    Returns:
        a callable on (n, 2) points, suitable for set_permeability
    """
    if count < 0:
        raise ConfigError(f"inclusion count must be non-negative, got {count}")
    if not 0 < kappa_low <= kappa_high:
        raise ConfigError("need 0 < kappa_low <= kappa_high")
    centres = np.random.default_rng(seed).random((count, 2))

    def kappa(points):
        d2 = np.sum((points[..., None, :] - centres) ** 2, axis=-1)
        bumps = np.exp(-sharpness * d2).sum(axis=-1)
        return np.maximum(kappa_high * (1.0 - bumps), kappa_low)

    logger.debug(f"{count} inclusions from seed {seed}, kappa in [{kappa_low:g}, {kappa_high:g}]")
    return kappa
