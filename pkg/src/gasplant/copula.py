"""Levy copulas linking the electricity and gas spike components.

The working family is the skewed Clayton copula
F(x, y) = ((alpha * y**-beta + 1) * x**-theta + y**-theta)**(-1/theta);
Independence and Comonotone are included as analytically known endpoints
for oracle tests.  Evaluation is done in log space so tiny tail levels
do not overflow x**-theta.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .market import JumpSpec, tail_integral

__all__ = [
    "SkewedClayton",
    "Independence",
    "Comonotone",
    "CopulaSpec",
    "copula_value",
    "joint_tail",
    "joint_cell_masses",
]


@dataclass(frozen=True)
class SkewedClayton:
    theta: float
    alpha: float = 0.0
    beta: float = 1.0

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if not 0 < self.beta <= self.theta + 1:
            raise ValueError("beta must satisfy 0 < beta <= theta + 1")


@dataclass(frozen=True)
class Independence:
    pass


@dataclass(frozen=True)
class Comonotone:
    pass


CopulaSpec = Union[SkewedClayton, Independence, Comonotone]


def copula_value(spec: CopulaSpec, x, y):
    """Positive Levy copula F(x, y) on marginal tail levels x, y >= 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("copula_value requires nonnegative tail levels")
    if isinstance(spec, Independence):
        # mass only where one margin is saturated (x or y infinite)
        out = np.zeros(np.broadcast(x, y).shape)
        out = np.where(np.isinf(y), np.minimum(x, np.inf), out)
        out = np.where(np.isinf(x), y, out)
        out = np.where(np.isinf(x) & np.isinf(y), np.inf, out)
        return out if out.ndim else float(out)
    if isinstance(spec, Comonotone):
        out = np.minimum(x, y)
        return out if out.ndim else float(out)
    if not isinstance(spec, SkewedClayton):
        raise TypeError(f"unknown copula spec {spec!r}")

    theta, alpha, beta = spec.theta, spec.alpha, spec.beta
    with np.errstate(divide="ignore", invalid="ignore"):
        lx = np.log(x)
        ly = np.log(y)
        # log((alpha*y**-beta + 1)*x**-theta + y**-theta), all in log space
        log_psi = np.logaddexp(np.log(alpha) - beta * ly, 0.0) if alpha > 0 else 0.0
        a = log_psi - theta * lx
        b = -theta * ly
        out = np.exp(-np.logaddexp(a, b) / theta)
    zero = (x == 0) | (y == 0)
    out = np.where(zero, 0.0, out)
    # F(inf, inf) is not finite; keep the one-sided limits exact
    out = np.where(np.isinf(x) & ~np.isinf(y) & ~zero, _limit_x_inf(spec, y), out)
    out = np.where(np.isinf(y) & ~np.isinf(x) & ~zero, x, out)
    return out if out.ndim else float(out)


def _limit_x_inf(spec: SkewedClayton, y):
    # x -> inf: F -> ((alpha*y**-beta)*0 + y**-theta)**(-1/theta) = y
    return np.asarray(y, dtype=float)


def joint_tail(spec: CopulaSpec, je: JumpSpec, jg: JumpSpec, z_e, z_g):
    """Joint tail integral U(z_e, z_g) = F(U_1(z_e), U_2(z_g))."""
    return copula_value(spec, tail_integral(je, z_e), tail_integral(jg, z_g))


def joint_cell_masses(
    spec: CopulaSpec,
    je: JumpSpec,
    jg: JumpSpec,
    dz_e: float,
    dz_g: float,
    K_e: int,
    K_g: int,
) -> np.ndarray:
    """Discretize the common-jump measure by inclusion-exclusion of the joint tail.

    Returns the (K_e+1, K_g+1) matrix of cell masses m[k, l] for cells
    centered at (k dz_e, l dz_g), clipped at zero on the axes.
    """
    if dz_e <= 0 or dz_g <= 0:
        raise ValueError("cell widths must be positive")
    if K_e < 1 or K_g < 1:
        raise ValueError("cell counts must be >= 1")
    a = np.maximum(0.0, (np.arange(K_e + 2) - 0.5) * dz_e)
    b = np.maximum(0.0, (np.arange(K_g + 2) - 0.5) * dz_g)
    U = joint_tail(spec, je, jg, a[:, None], b[None, :])
    m = U[:-1, :-1] - U[1:, :-1] - U[:-1, 1:] + U[1:, 1:]
    # 2-increasingness guarantees m >= 0 up to roundoff
    return np.maximum(m, 0.0)
