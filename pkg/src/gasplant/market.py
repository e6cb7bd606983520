"""Regime-switching arithmetic spot model for electricity and gas.

Each regime carries mean-reverting diffusion dynamics plus an upward
compound-Poisson spike component for both commodities, on top of a
deterministic seasonal level.  All rates are per hour; prices are in
the raw units of the parameter tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Union

import numpy as np
from scipy.special import ndtr  # standard normal CDF, vectorized

__all__ = [
    "SeasonalityFn",
    "InverseGaussian",
    "TruncatedNormal",
    "PointMass",
    "JumpSpec",
    "RegimeParams",
    "ModelSpec",
    "seasonality_value",
    "seasonality_derivative",
    "jump_cdf",
    "jump_mean",
    "tail_integral",
    "marginal_cell_masses",
    "effective_drift",
]


@dataclass(frozen=True)
class SeasonalityFn:
    """amplitude * trig((2*pi*t + phase) / period) + offset, trig in {sin, cos}."""

    amplitude: float
    phase: float
    period: float
    offset: float
    shape: Literal["sine", "cosine"] = "sine"

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError(f"period must be positive, got {self.period}")
        if self.shape not in ("sine", "cosine"):
            raise ValueError(f"unknown shape {self.shape!r}")


@dataclass(frozen=True)
class InverseGaussian:
    """IG(mu, lam) jump-size distribution on (0, inf)."""

    mu: float
    lam: float

    def __post_init__(self):
        if self.mu <= 0 or self.lam <= 0:
            raise ValueError("inverse Gaussian requires mu > 0 and lam > 0")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        if np.any(pos):
            xp = x[pos]
            s = np.sqrt(self.lam / xp)
            # closed form via the normal CDF; the exp factor is folded into
            # the log to stay finite for large lam/mu
            a = ndtr(s * (xp / self.mu - 1.0))
            logb = 2.0 * self.lam / self.mu + _log_ndtr(-s * (xp / self.mu + 1.0))
            out[pos] = a + np.exp(logb)
        return np.clip(out, 0.0, 1.0)

    def mean(self) -> float:
        return self.mu


@dataclass(frozen=True)
class TruncatedNormal:
    """Normal(mean, sd) conditioned on (0, inf)."""

    mean_: float
    sd: float

    def __post_init__(self):
        if self.sd <= 0:
            raise ValueError("sd must be positive")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        z0 = ndtr(-self.mean_ / self.sd)  # mass below 0 before truncation
        out = (ndtr((x - self.mean_) / self.sd) - z0) / (1.0 - z0)
        return np.clip(np.where(x > 0, out, 0.0), 0.0, 1.0)

    def mean(self) -> float:
        delta = -self.mean_ / self.sd
        keep = 1.0 - ndtr(delta)
        phi = math.exp(-0.5 * delta * delta) / math.sqrt(2.0 * math.pi)
        return self.mean_ + self.sd * phi / keep


@dataclass(frozen=True)
class PointMass:
    """All jumps have the same size z > 0."""

    z: float

    def __post_init__(self):
        if self.z <= 0:
            raise ValueError("point mass must sit at z > 0")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= self.z, 1.0, 0.0)

    def mean(self) -> float:
        return self.z


SizeDist = Union[InverseGaussian, TruncatedNormal, PointMass]


@dataclass(frozen=True)
class JumpSpec:
    """Compound-Poisson spike component: arrival intensity + size distribution."""

    intensity: float
    size_dist: SizeDist

    def __post_init__(self):
        if self.intensity < 0:
            raise ValueError("intensity must be nonnegative")


@dataclass(frozen=True)
class RegimeParams:
    alpha_e: float
    alpha_g: float
    sigma_e: float
    sigma_g: float
    rho: float
    jump_e: JumpSpec
    jump_g: JumpSpec
    seasonality_e: SeasonalityFn
    seasonality_g: SeasonalityFn
    switch_rate: float = 0.0

    def __post_init__(self):
        if self.sigma_e < 0 or self.sigma_g < 0:
            raise ValueError("volatilities must be nonnegative")
        if abs(self.rho) > 1:
            raise ValueError("|rho| must be <= 1")
        if self.alpha_e < 0 or self.alpha_g < 0:
            raise ValueError("mean-reversion rates must be nonnegative")
        if self.switch_rate < 0:
            raise ValueError("switch_rate must be nonnegative")


DriftConvention = Literal["paper-literal", "compensation-consistent"]


@dataclass(frozen=True)
class ModelSpec:
    regimes: tuple[RegimeParams, ...]
    discount_rate: float
    horizon: float
    drift_convention: DriftConvention = "compensation-consistent"

    def __post_init__(self):
        if not 1 <= len(self.regimes) <= 2:
            raise ValueError("need 1 or 2 regimes")
        if self.discount_rate < 0:
            raise ValueError("discount rate must be nonnegative")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        object.__setattr__(self, "regimes", tuple(self.regimes))


def _log_ndtr(x):
    from scipy.special import log_ndtr

    return log_ndtr(x)


def seasonality_value(f: SeasonalityFn, t):
    arg = (2.0 * np.pi * np.asarray(t, dtype=float) + f.phase) / f.period
    trig = np.sin if f.shape == "sine" else np.cos
    return f.amplitude * trig(arg) + f.offset


def seasonality_derivative(f: SeasonalityFn, t):
    arg = (2.0 * np.pi * np.asarray(t, dtype=float) + f.phase) / f.period
    dtrig = np.cos if f.shape == "sine" else lambda a: -np.sin(a)
    return f.amplitude * (2.0 * np.pi / f.period) * dtrig(arg)


def jump_cdf(spec: JumpSpec, x):
    """Size-distribution CDF D(x); defined for x >= 0 only."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("jump_cdf requires x >= 0")
    return spec.size_dist.cdf(x)


def jump_mean(spec: JumpSpec) -> float:
    """Mean jump size of the size distribution."""
    return spec.size_dist.mean()


def tail_integral(spec: JumpSpec, x):
    """Marginal tail integral U(x) = intensity * (1 - D(x))."""
    return spec.intensity * (1.0 - jump_cdf(spec, x))


def marginal_cell_masses(spec: JumpSpec, dz: float, K: int) -> np.ndarray:
    """Jump measure mass per quadrature cell, k = 0..K.

    Cell k spans [max(0, (k-1/2) dz), (k+1/2) dz); mass beyond cell K is
    dropped (the caller chooses K so the discarded tail is negligible).
    """
    if dz <= 0:
        raise ValueError("dz must be positive")
    if K < 1:
        raise ValueError("K must be >= 1")
    k = np.arange(K + 1)
    hi = (k + 0.5) * dz
    lo = np.maximum(0.0, (k - 0.5) * dz)
    return spec.intensity * (jump_cdf(spec, hi) - jump_cdf(spec, lo))


def effective_drift(
    regime: RegimeParams,
    S,
    t,
    which: Literal["electricity", "gas"],
    convention: DriftConvention = "compensation-consistent",
):
    """First-order price drift coefficient after splitting the jump operator.

    paper-literal:            Lbar(t) - alpha*S - lambda
    compensation-consistent:  Lbar(t) + lambda*m - alpha*S - lambda
    where Lbar = Lambda' + alpha*Lambda and m is the mean jump size.
    """
    if which == "electricity":
        seas, alpha, jump = regime.seasonality_e, regime.alpha_e, regime.jump_e
    elif which == "gas":
        seas, alpha, jump = regime.seasonality_g, regime.alpha_g, regime.jump_g
    else:
        raise ValueError(f"unknown component {which!r}")
    lbar = seasonality_derivative(seas, t) + alpha * seasonality_value(seas, t)
    drift = lbar - alpha * np.asarray(S, dtype=float) - jump.intensity
    if convention == "compensation-consistent":
        drift = drift + jump.intensity * jump_mean(jump)
    elif convention != "paper-literal":
        raise ValueError(f"unknown drift convention {convention!r}")
    return drift
