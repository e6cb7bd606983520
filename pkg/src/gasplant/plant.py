"""Physical model of the gas-fired plant.

Power output is a piecewise-linear function of boiler temperature with a
dead zone below the minimum generation temperature.  Burning fuel at rate
c pulls the temperature toward the equilibrium level Lbar(c) at speed eta,
and a ramp-rate cap on |dL/dt| induces temperature-dependent control
bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PlantSpec",
    "output",
    "equilibrium_temp",
    "control_bounds",
    "temperature_drift",
    "boiler_step",
]


@dataclass(frozen=True)
class PlantSpec:
    L_min: float = 20.0
    L_max: float = 600.0
    L_gen: float = 300.0
    output_slope: float = 5.0 / 6.0
    output_intercept: float = -100.0
    b0: float = 650.0
    b1: float = 0.00003571
    b2: float = 4200.0
    eta: float = 0.1
    c_abs_max: float = 3017.0
    ramp_limit: float = 15.0

    def __post_init__(self):
        if not self.L_min < self.L_gen < self.L_max:
            raise ValueError("need L_min < L_gen < L_max")
        if self.b1 <= 0:
            raise ValueError("b1 must be positive")
        if not 0 < self.c_abs_max < self.b2:
            raise ValueError("need 0 < c_abs_max < b2")
        if self.eta <= 0 or self.ramp_limit <= 0:
            raise ValueError("eta and ramp_limit must be positive")


def _check_L(spec: PlantSpec, L):
    L = np.asarray(L, dtype=float)
    if np.any(L < spec.L_min - 1e-9) or np.any(L > spec.L_max + 1e-9):
        raise ValueError(f"temperature outside [{spec.L_min}, {spec.L_max}]")
    return L


def output(spec: PlantSpec, L):
    """Electricity output H(L) in MW; zero below the generation threshold."""
    L = _check_L(spec, L)
    gen = spec.output_slope * L + spec.output_intercept
    out = np.where(L < spec.L_gen, 0.0, gen)
    return out if out.ndim else float(out)


def equilibrium_temp(spec: PlantSpec, c):
    """Steady-state boiler temperature Lbar(c) = b0 - b1 (c - b2)^2."""
    c = np.asarray(c, dtype=float)
    if np.any(c < -1e-9) or np.any(c > spec.c_abs_max + 1e-9):
        raise ValueError(f"fuel rate outside [0, {spec.c_abs_max}]")
    out = spec.b0 - spec.b1 * (c - spec.b2) ** 2
    return out if out.ndim else float(out)


def control_bounds(spec: PlantSpec, L):
    """Admissible fuel-rate interval [c_min(L), c_max(L)] under the ramp cap.

    From |eta (Lbar(c) - L)| <= ramp_limit with Lbar increasing on
    [0, c_abs_max]: the lower bound keeps the boiler from cooling too
    fast, the upper one from heating too fast.  When even maximum burn
    cannot heat at the ramp limit the upper constraint does not bind.
    """
    L = _check_L(spec, L)
    band = spec.ramp_limit / spec.eta
    lo_rad = (spec.b0 - L + band) / spec.b1
    c_min = np.maximum(0.0, spec.b2 - np.sqrt(np.maximum(lo_rad, 0.0)))
    hi_rad = (spec.b0 - L - band) / spec.b1
    c_max = np.where(
        hi_rad > 0.0,
        np.minimum(spec.c_abs_max, spec.b2 - np.sqrt(np.maximum(hi_rad, 0.0))),
        spec.c_abs_max,
    )
    if c_min.ndim:
        return c_min, c_max
    return float(c_min), float(c_max)


def temperature_drift(spec: PlantSpec, L, c):
    """dL/dt = eta * (Lbar(c) - L)."""
    L = _check_L(spec, L)
    out = spec.eta * (equilibrium_temp(spec, c) - L)
    return out if np.ndim(out) else float(out)


def boiler_step(spec: PlantSpec, L, c, dt: float):
    """Explicit Euler step of the boiler ODE, clamped to the temperature range."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    out = np.clip(
        np.asarray(L, dtype=float) + dt * temperature_drift(spec, L, c),
        spec.L_min,
        spec.L_max,
    )
    return out if out.ndim else float(out)
