"""Independent validation tools for the PIDE solver.

Path simulation of the spot model and regime chain, discounted Monte
Carlo evaluation of a stored policy, and a dense 1-D dynamic-programming
value for degenerate (deterministic) parameter sets.  Everything here is
deliberately independent of the solver's discretization choices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import ndtri

from .market import (
    InverseGaussian,
    JumpSpec,
    ModelSpec,
    PointMass,
    RegimeParams,
    TruncatedNormal,
    jump_mean,
    seasonality_value,
)
from .plant import PlantSpec, control_bounds, equilibrium_temp, output
from .solver import GridSpec, PolicySurface

__all__ = [
    "PathConfig",
    "RegimePath",
    "sample_jump_sizes",
    "jump_size_quantile",
    "simulate_regime_chain",
    "simulate_path",
    "evaluate_policy_mc",
    "deterministic_curve",
    "deterministic_value",
]

JumpMode = Literal["none", "independent", "comonotone"]


@dataclass(frozen=True)
class PathConfig:
    step: float
    paths: int
    seed: int
    jump_dependence_mode: JumpMode = "none"

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.paths < 1:
            raise ValueError("paths must be >= 1")


@dataclass
class RegimePath:
    """Piecewise-constant regime trajectory from exact exponential clocks."""

    switch_times: np.ndarray  # strictly increasing, first entry 0
    states: np.ndarray  # state entered at each switch time

    def at(self, t) -> np.ndarray:
        idx = np.searchsorted(self.switch_times, np.asarray(t, dtype=float), side="right") - 1
        return self.states[np.maximum(idx, 0)]

    def sojourns(self) -> np.ndarray:
        return np.diff(self.switch_times)


def simulate_regime_chain(model: ModelSpec, horizon: float, rng: np.random.Generator) -> RegimePath:
    """Exact exponential-holding-time simulation of the two-state chain."""
    if len(model.regimes) != 2:
        raise ValueError("regime chain simulation needs a two-regime model")
    rates = [model.regimes[0].switch_rate, model.regimes[1].switch_rate]
    times = [0.0]
    states = [0]
    t, state = 0.0, 0
    while True:
        lam = rates[state]
        if lam == 0:
            break
        t += rng.exponential(1.0 / lam)
        if t >= horizon:
            break
        state = 1 - state
        times.append(t)
        states.append(state)
    return RegimePath(np.asarray(times), np.asarray(states))


# ----------------------------------------------------------------------
# jump size sampling

def sample_jump_sizes(dist, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n i.i.d. jump sizes.

    Inverse Gaussian uses the transformation method (one chi-square
    deviate plus a uniform acceptance branch); the truncated normal
    redraws the negligible negative tail.
    """
    if n == 0:
        return np.zeros(0)
    if isinstance(dist, PointMass):
        return np.full(n, dist.z)
    if isinstance(dist, TruncatedNormal):
        out = rng.normal(dist.mean_, dist.sd, n)
        bad = out <= 0
        while np.any(bad):
            out[bad] = rng.normal(dist.mean_, dist.sd, int(bad.sum()))
            bad = out <= 0
        return out
    if isinstance(dist, InverseGaussian):
        mu, lam = dist.mu, dist.lam
        y = rng.standard_normal(n) ** 2
        x = mu + mu * mu * y / (2 * lam) - (mu / (2 * lam)) * np.sqrt(
            4 * mu * lam * y + mu * mu * y * y
        )
        u = rng.uniform(size=n)
        take_other = u > mu / (mu + x)
        out = np.where(take_other, mu * mu / x, x)
        return out
    raise TypeError(f"unknown size distribution {dist!r}")


def jump_size_quantile(dist, p):
    """Inverse CDF of the size distribution (used for comonotone pairing)."""
    p = np.asarray(p, dtype=float)
    if isinstance(dist, PointMass):
        return np.full_like(p, dist.z)
    if isinstance(dist, TruncatedNormal):
        from scipy.special import ndtr

        z0 = ndtr(-dist.mean_ / dist.sd)
        return dist.mean_ + dist.sd * ndtri(z0 + p * (1.0 - z0))
    if isinstance(dist, InverseGaussian):
        from scipy.stats import invgauss

        return invgauss.ppf(p, mu=dist.mu / dist.lam, scale=dist.lam)
    raise TypeError(f"unknown size distribution {dist!r}")


# ----------------------------------------------------------------------
# spot path simulation

def _sde_shift(model: ModelSpec, jump: JumpSpec, mode: JumpMode) -> float:
    # literal drift pricing corresponds to fully compensated jumps, so the
    # mean jump flow is folded out of the drift -- but only when jumps are
    # actually being simulated; "none" mode is the pure diffusion model
    if mode != "none" and model.drift_convention == "paper-literal":
        return jump.intensity * jump_mean(jump) if jump.intensity > 0 else 0.0
    return 0.0


def _ou_exact_step(S, seas, alpha, shift, t, dt, noise):
    lam_t = seasonality_value(seas, t)
    lam_next = seasonality_value(seas, t + dt)
    if alpha > 0:
        w = S - lam_t + shift / alpha
        return lam_next - shift / alpha + w * math.exp(-alpha * dt) + noise
    return S + (lam_next - lam_t) - shift * dt + noise


def _jump_increments(jump: JumpSpec, dt: float, n_paths: int, rng) -> np.ndarray:
    incr = np.zeros(n_paths)
    if jump.intensity == 0:
        return incr
    counts = rng.poisson(jump.intensity * dt, n_paths)
    total = int(counts.sum())
    if total:
        sizes = sample_jump_sizes(jump.size_dist, total, rng)
        np.add.at(incr, np.repeat(np.arange(n_paths), counts), sizes)
    return incr


def simulate_path(
    model: ModelSpec,
    config: PathConfig,
    s_e0: float,
    s_g0: float,
    horizon: Optional[float] = None,
    regimes: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
):
    """Simulate (S_e, S_g) on a uniform time grid for all paths at once.

    The diffusion part uses the exact mean-reverting transition; jumps
    are layered per the configured dependence mode.  `regimes` is an
    integer array (paths, n_steps) giving the regime over each step;
    default is regime 0 throughout.

    Returns (t_grid, S_e, S_g) with price arrays of shape
    (paths, n_steps + 1).
    """
    rng = np.random.default_rng(config.seed) if rng is None else rng
    T = model.horizon if horizon is None else horizon
    n_steps = max(1, int(round(T / config.step)))
    dt = T / n_steps
    n = config.paths

    S_e = np.empty((n, n_steps + 1))
    S_g = np.empty((n, n_steps + 1))
    S_e[:, 0] = s_e0
    S_g[:, 0] = s_g0
    if regimes is None:
        regimes = np.zeros((n, n_steps), dtype=int)

    sqdt = math.sqrt(dt)
    for k in range(n_steps):
        t = k * dt
        z1 = rng.standard_normal(n)
        z2 = rng.standard_normal(n)
        se, sg = S_e[:, k].copy(), S_g[:, k].copy()
        for l in range(len(model.regimes)):
            mask = regimes[:, k] == l
            if not np.any(mask):
                continue
            reg = model.regimes[l]
            zg = reg.rho * z1[mask] + math.sqrt(1 - reg.rho**2) * z2[mask]
            if reg.alpha_e > 0:
                sd_e = reg.sigma_e * math.sqrt(
                    (1 - math.exp(-2 * reg.alpha_e * dt)) / (2 * reg.alpha_e)
                )
            else:
                sd_e = reg.sigma_e * sqdt
            if reg.alpha_g > 0:
                sd_g = reg.sigma_g * math.sqrt(
                    (1 - math.exp(-2 * reg.alpha_g * dt)) / (2 * reg.alpha_g)
                )
            else:
                sd_g = reg.sigma_g * sqdt
            se[mask] = _ou_exact_step(
                S_e[mask, k],
                reg.seasonality_e,
                reg.alpha_e,
                _sde_shift(model, reg.jump_e, config.jump_dependence_mode),
                t,
                dt,
                sd_e * z1[mask],
            )
            sg[mask] = _ou_exact_step(
                S_g[mask, k],
                reg.seasonality_g,
                reg.alpha_g,
                _sde_shift(model, reg.jump_g, config.jump_dependence_mode),
                t,
                dt,
                sd_g * zg,
            )
            je, jg = _regime_jumps(model.regimes[l], config, dt, int(mask.sum()), rng)
            se[mask] += je
            sg[mask] += jg
        S_e[:, k + 1] = se
        S_g[:, k + 1] = sg
    t_grid = np.arange(n_steps + 1) * dt
    return t_grid, S_e, S_g


def _regime_jumps(reg: RegimeParams, config: PathConfig, dt, n, rng):
    mode = config.jump_dependence_mode
    if mode == "none":
        return np.zeros(n), np.zeros(n)
    if mode == "independent":
        return (
            _jump_increments(reg.jump_e, dt, n, rng),
            _jump_increments(reg.jump_g, dt, n, rng),
        )
    if mode == "comonotone":
        lam_e, lam_g = reg.jump_e.intensity, reg.jump_g.intensity
        lam_c = min(lam_e, lam_g)
        inc_e = np.zeros(n)
        inc_g = np.zeros(n)
        if lam_c > 0:
            counts = rng.poisson(lam_c * dt, n)
            total = int(counts.sum())
            if total:
                # shared tail level u < lam_c maps through both quantiles
                u = rng.uniform(0.0, lam_c, total)
                z_e = jump_size_quantile(reg.jump_e.size_dist, 1.0 - u / lam_e)
                z_g = jump_size_quantile(reg.jump_g.size_dist, 1.0 - u / lam_g)
                idx = np.repeat(np.arange(n), counts)
                np.add.at(inc_e, idx, z_e)
                np.add.at(inc_g, idx, z_g)
        # residual single-commodity streams carry the excess intensity
        for lam, jump, inc in (
            (lam_e, reg.jump_e, inc_e),
            (lam_g, reg.jump_g, inc_g),
        ):
            if lam > lam_c:
                counts = rng.poisson((lam - lam_c) * dt, n)
                total = int(counts.sum())
                if total:
                    u = rng.uniform(lam_c, lam, total)
                    z = jump_size_quantile(jump.size_dist, 1.0 - u / lam)
                    np.add.at(inc, np.repeat(np.arange(n), counts), z)
        return inc_e, inc_g
    raise ValueError(f"unknown jump mode {mode!r}")


# ----------------------------------------------------------------------
# policy evaluation

def evaluate_policy_mc(
    model: ModelSpec,
    plant: PlantSpec,
    grid: GridSpec,
    policy: PolicySurface,
    config: PathConfig,
    s_e0: float,
    s_g0: float,
    L0: float,
    regime0: int = 0,
):
    """Discounted Monte Carlo value of a stored policy from one start state.

    Policy lookup is multilinear in (S_e, S_g, L) at the nearest stored
    time-to-maturity snapshot, with price coordinates clamped to the
    grid.  Returns (mean, standard error).  Bit-for-bit reproducible for
    a fixed seed and path count.
    """
    rng = np.random.default_rng(config.seed)
    T = model.horizon
    n_steps = max(1, int(round(T / config.step)))
    dt = T / n_steps
    n = config.paths

    s_e_nodes = grid.s_e_nodes()
    s_g_nodes = grid.s_g_nodes()
    l_nodes = plant.L_min + np.arange(grid.N_L + 1) * (plant.L_max - plant.L_min) / grid.N_L
    interps = {}
    collapsed_gas = len(s_g_nodes) == 1

    def control_at(snap: int, l: int, se, sg, L):
        key = (snap, l)
        if key not in interps:
            c = policy.controls[snap, l]
            if collapsed_gas:
                interps[key] = RegularGridInterpolator(
                    (s_e_nodes, l_nodes), c[:, 0, :], bounds_error=False, fill_value=None
                )
            else:
                interps[key] = RegularGridInterpolator(
                    (s_e_nodes, s_g_nodes, l_nodes), c, bounds_error=False, fill_value=None
                )
        f = interps[key]
        se_c = np.clip(se, s_e_nodes[0], s_e_nodes[-1])
        L_c = np.clip(L, l_nodes[0], l_nodes[-1])
        if collapsed_gas:
            pts = np.column_stack([se_c, L_c])
        else:
            sg_c = np.clip(sg, s_g_nodes[0], s_g_nodes[-1])
            pts = np.column_stack([se_c, sg_c, L_c])
        c = f(pts)
        lo, hi = control_bounds(plant, np.clip(L, plant.L_min, plant.L_max))
        return np.clip(c, lo, hi)

    two_regime = len(model.regimes) == 2
    regime = np.full(n, regime0, dtype=int)
    S_e = np.full(n, float(s_e0))
    S_g = np.full(n, float(s_g0))
    L = np.full(n, float(L0))
    payoff = np.zeros(n)
    sqdt = math.sqrt(dt)

    for k in range(n_steps):
        t = k * dt
        tau = T - t
        snap = int(np.argmin(np.abs(policy.taus - tau)))
        disc = math.exp(-model.discount_rate * t)
        c = control_at(snap, 0, S_e, S_g, L)
        if two_regime:
            c1 = control_at(snap, 1, S_e, S_g, L)
            c = np.where(regime == 1, c1, c)
        payoff += disc * (output(plant, np.clip(L, plant.L_min, plant.L_max)) * S_e - S_g * c) * dt

        z1 = rng.standard_normal(n)
        z2 = rng.standard_normal(n)
        new_e = np.empty(n)
        new_g = np.empty(n)
        for l in range(len(model.regimes)):
            mask = regime == l
            if not np.any(mask):
                new_e[mask] = S_e[mask]
                continue
            reg = model.regimes[l]
            zg = reg.rho * z1[mask] + math.sqrt(1 - reg.rho**2) * z2[mask]
            sd_e = (
                reg.sigma_e
                * math.sqrt((1 - math.exp(-2 * reg.alpha_e * dt)) / (2 * reg.alpha_e))
                if reg.alpha_e > 0
                else reg.sigma_e * sqdt
            )
            sd_g = (
                reg.sigma_g
                * math.sqrt((1 - math.exp(-2 * reg.alpha_g * dt)) / (2 * reg.alpha_g))
                if reg.alpha_g > 0
                else reg.sigma_g * sqdt
            )
            new_e[mask] = _ou_exact_step(
                S_e[mask], reg.seasonality_e, reg.alpha_e,
                _sde_shift(model, reg.jump_e, config.jump_dependence_mode), t, dt, sd_e * z1[mask],
            )
            new_g[mask] = _ou_exact_step(
                S_g[mask], reg.seasonality_g, reg.alpha_g,
                _sde_shift(model, reg.jump_g, config.jump_dependence_mode), t, dt, sd_g * zg,
            )
            je, jg = _regime_jumps(reg, config, dt, int(mask.sum()), rng)
            new_e[mask] += je
            new_g[mask] += jg
        S_e, S_g = new_e, new_g

        a = plant.eta * (equilibrium_temp(plant, c) - L)
        L = np.clip(L + dt * a, plant.L_min, plant.L_max)
        if two_regime:
            u = rng.uniform(size=n)
            rates = np.where(regime == 0, model.regimes[0].switch_rate,
                             model.regimes[1].switch_rate)
            flip = u < 1.0 - np.exp(-rates * dt)
            regime = np.where(flip, 1 - regime, regime)

    mean = float(payoff.mean())
    se = float(payoff.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


# ----------------------------------------------------------------------
# deterministic 1-D dynamic-programming oracle

def _assert_degenerate(model: ModelSpec):
    for reg in model.regimes:
        if reg.sigma_e != 0 or reg.sigma_g != 0:
            raise ValueError("deterministic oracle requires zero volatilities")
        if reg.jump_e.intensity != 0 or reg.jump_g.intensity != 0:
            raise ValueError("deterministic oracle requires zero jump intensities")
        if reg.alpha_e != 0 or reg.alpha_g != 0:
            raise ValueError("deterministic oracle requires zero mean reversion")
        if reg.seasonality_e.amplitude != 0 or reg.seasonality_g.amplitude != 0:
            raise ValueError("deterministic oracle requires constant seasonality")


def deterministic_curve(
    model: ModelSpec,
    plant: PlantSpec,
    s_e: float,
    s_g: float,
    dL: float = 1.0,
    dtau: float = 0.05,
):
    """Deterministic-control value over the whole temperature range.

    Prices are frozen at (s_e, s_g); dense DP over (L, tau) with
    first-order upwinding and a candidate search over the admissible
    fuel-rate interval.  Returns (L_nodes, values).
    """
    _assert_degenerate(model)
    n_L = int(math.ceil((plant.L_max - plant.L_min) / dL))
    L_nodes = np.linspace(plant.L_min, plant.L_max, n_L + 1)
    h = L_nodes[1] - L_nodes[0]
    M = int(math.ceil(model.horizon / dtau))
    dt = model.horizon / M
    r = model.discount_rate

    H = output(plant, L_nodes)
    c_lo, c_hi = control_bounds(plant, L_nodes)
    q = np.linspace(0.0, 1.0, 65)
    cand = c_lo[:, None] + q[None, :] * (c_hi - c_lo)[:, None]  # (n_L+1, 65)
    a_cand = plant.eta * (equilibrium_temp(plant, cand) - L_nodes[:, None])
    payoff_cand = H[:, None] * s_e - s_g * cand

    W = np.zeros(n_L + 1)
    for _ in range(M):
        dfwd = np.empty_like(W)
        dfwd[:-1] = (W[1:] - W[:-1]) / h
        dfwd[-1] = (W[-1] - W[-2]) / h
        dbwd = np.empty_like(W)
        dbwd[1:] = (W[1:] - W[:-1]) / h
        dbwd[0] = dfwd[0]
        obj = payoff_cand + np.where(
            a_cand >= 0, a_cand * dfwd[:, None], a_cand * dbwd[:, None]
        )
        best = obj.max(axis=1)
        W = W + dt * (best - r * W)
    return L_nodes, W


def deterministic_value(
    model: ModelSpec,
    plant: PlantSpec,
    start_L: float,
    s_e: float,
    s_g: float,
    dL: float = 1.0,
    dtau: float = 0.05,
) -> float:
    """deterministic_curve interpolated at a single start temperature."""
    L_nodes, W = deterministic_curve(model, plant, s_e, s_g, dL, dtau)
    return float(np.interp(start_L, L_nodes, W))
