"""Explicit finite-difference solver for the coupled plant-valuation PIDEs.

State is a per-regime lattice V[l, i, j, u] over electricity price, gas
price and boiler temperature, marched forward in time-to-maturity from
V = 0.  Each step: per-node fuel-rate optimization, upwinded diffusion
stencil, trapezoidal jump quadrature (marginal and cross), MUSCL
slope-limited advection in temperature, and Jacobi-style regime coupling.

Boundary treatment drops the second-derivative and jump terms normal to
each price boundary and keeps inward one-sided drift; values needed by
the jump sums beyond the price grid come from linear extrapolation of
the outermost slope, which is folded into precomputed operator matrices.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.signal import fftconvolve

from .copula import CopulaSpec, Independence, joint_tail
from .market import (
    JumpSpec,
    ModelSpec,
    RegimeParams,
    effective_drift,
    marginal_cell_masses,
    tail_integral,
)
from .plant import PlantSpec, control_bounds, equilibrium_temp, output

__all__ = [
    "GridSpec",
    "Lattice",
    "PolicySurface",
    "SolveResult",
    "NumericalError",
    "minmod",
    "stability_bound",
    "resolve_grid",
    "HJBSolver",
    "solve",
]

TAIL_TRUNCATION_FRACTION = 1e-6  # discarded jump intensity relative to lambda


class NumericalError(RuntimeError):
    """Raised on CFL violations or non-finite lattice values."""


@dataclass(frozen=True)
class GridSpec:
    """Lattice geometry and quadrature resolution.

    N_g = 0 collapses the gas axis to the single node S_g = S_g_max
    (constant-gas mode); all gas-direction terms then vanish.  B/K/M
    left as None are filled in by resolve_grid.
    """

    S_e_max: float
    S_g_max: float
    N_e: int
    N_g: int
    N_L: int
    M: Optional[int] = None
    B_e: Optional[float] = None
    B_g: Optional[float] = None
    K_e: Optional[int] = None
    K_g: Optional[int] = None
    N_c: int = 64

    def __post_init__(self):
        if self.N_e < 2 or self.N_L < 2:
            raise ValueError("N_e and N_L must be >= 2")
        if self.N_g < 0 or self.N_g == 1:
            raise ValueError("N_g must be 0 (collapsed) or >= 2")
        if self.S_e_max <= 0 or self.S_g_max < 0:
            raise ValueError("price bounds must be positive")
        if self.N_c < 2:
            raise ValueError("N_c must be >= 2")
        for name in ("M", "K_e", "K_g"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def dS_e(self) -> float:
        return self.S_e_max / self.N_e

    @property
    def dS_g(self) -> float:
        if self.N_g == 0:
            raise ValueError("gas axis is collapsed; dS_g undefined")
        return self.S_g_max / self.N_g

    def dL(self, plant: PlantSpec) -> float:
        return (plant.L_max - plant.L_min) / self.N_L

    def s_e_nodes(self) -> np.ndarray:
        return np.arange(self.N_e + 1) * self.dS_e

    def s_g_nodes(self) -> np.ndarray:
        if self.N_g == 0:
            return np.array([self.S_g_max])
        return np.arange(self.N_g + 1) * self.dS_g

    def l_nodes(self, plant: PlantSpec) -> np.ndarray:
        return plant.L_min + np.arange(self.N_L + 1) * self.dL(plant)


@dataclass
class Lattice:
    """Value array per regime at one time level."""

    values: np.ndarray  # (n_regimes, N_e+1, N_g'+1, N_L+1)
    time_index: int
    tau: float
    grid: GridSpec


@dataclass
class PolicySurface:
    """Optimal fuel-rate arrays recorded at snapshot times."""

    taus: np.ndarray  # (n_snap,)
    controls: np.ndarray  # (n_snap, n_regimes, N_e+1, N_g'+1, N_L+1)


@dataclass
class SolveResult:
    snapshots: list[Lattice]
    policy: PolicySurface
    final: Lattice
    grid: GridSpec
    dtau: float
    wall_time: float


def minmod(a, b):
    """0.5 (sign(a) + sign(b)) min(|a|, |b|)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = 0.5 * (np.sign(a) + np.sign(b)) * np.minimum(np.abs(a), np.abs(b))
    return out if out.ndim else float(out)


def _jump_cutoff(jump: JumpSpec) -> float:
    """Smallest x with tail_integral(x) below the truncation tolerance."""
    if jump.intensity == 0:
        return 0.0
    target = TAIL_TRUNCATION_FRACTION * jump.intensity
    hi = 1.0
    while tail_integral(jump, hi) > target and hi < 1e12:
        hi *= 2.0
    if tail_integral(jump, hi) > target:
        raise ValueError("jump size distribution tail too heavy to truncate")
    return brentq(lambda x: tail_integral(jump, x) - target, 0.0, hi, xtol=1e-10)


def _max_abs_drift(model: ModelSpec, regime: RegimeParams, S_max: float, which: str) -> float:
    t = np.linspace(0.0, model.horizon, 4097)
    lo = np.abs(effective_drift(regime, 0.0, t, which, model.drift_convention))
    hi = np.abs(effective_drift(regime, S_max, t, which, model.drift_convention))
    return float(max(lo.max(), hi.max()))


def stability_bound(grid: GridSpec, model: ModelSpec, plant: PlantSpec) -> float:
    """Largest safe explicit time step (0.9 safety factor included)."""
    worst = 0.0
    for reg in model.regimes:
        rate = model.discount_rate + reg.switch_rate
        rate += reg.jump_e.intensity + reg.jump_g.intensity
        rate += reg.sigma_e**2 / grid.dS_e**2
        rate += _max_abs_drift(model, reg, grid.S_e_max, "electricity") / grid.dS_e
        if grid.N_g > 0:
            rate += reg.sigma_g**2 / grid.dS_g**2
            rate += abs(reg.rho) * reg.sigma_e * reg.sigma_g / (2 * grid.dS_e * grid.dS_g)
            rate += _max_abs_drift(model, reg, grid.S_g_max, "gas") / grid.dS_g
        rate += plant.ramp_limit / grid.dL(plant)
        worst = max(worst, rate)
    return math.inf if worst == 0 else 0.9 / worst


def resolve_grid(grid: GridSpec, model: ModelSpec, plant: PlantSpec) -> GridSpec:
    """Fill in jump truncation bounds, quadrature counts and step count."""
    updates = {}
    B_e = grid.B_e
    if B_e is None:
        B_e = max(_jump_cutoff(r.jump_e) for r in model.regimes)
        updates["B_e"] = B_e
    if grid.K_e is None:
        updates["K_e"] = max(1, math.ceil(B_e / grid.dS_e - 0.5))
    B_g = grid.B_g
    if B_g is None:
        B_g = max(_jump_cutoff(r.jump_g) for r in model.regimes)
        updates["B_g"] = B_g
    if grid.K_g is None:
        dz_g = grid.dS_g if grid.N_g > 0 else grid.dS_e
        updates["K_g"] = max(1, math.ceil(B_g / dz_g - 0.5))
    if grid.M is None:
        dtau_max = stability_bound(grid, model, plant)
        updates["M"] = 1 if math.isinf(dtau_max) else max(1, math.ceil(model.horizon / dtau_max))
    return replace(grid, **updates) if updates else grid


def _marginal_jump_matrix(nu: np.ndarray, n_nodes: int, dz: float) -> np.ndarray:
    """Dense operator A with (A V)[i] = (1/2dz) sum_k nu_k (V[i+k+1] - V[i+k-1]).

    Rows 0 and n_nodes-1 are zero (price-boundary nodes drop their own
    jump operator).  Indices past the grid use linear extrapolation of
    the last one-sided slope, folded into the last two columns.
    """
    A = np.zeros((n_nodes, n_nodes))
    last = n_nodes - 1

    def add(row, idx, w):
        if idx <= last:
            A[row, idx] += w
        else:
            p = idx - last
            A[row, last] += w * (1.0 + p)
            A[row, last - 1] -= w * p

    for i in range(1, last):
        for k, nu_k in enumerate(nu):
            if nu_k == 0.0:
                continue
            add(i, i + k + 1, nu_k / (2 * dz))
            add(i, i + k - 1, -nu_k / (2 * dz))
    return A


def _extend_linear(V: np.ndarray, axis: int, extra: int) -> np.ndarray:
    """Append `extra` nodes by extrapolating the outermost one-sided slope."""
    if extra <= 0:
        return V
    V = np.moveaxis(V, axis, 0)
    slope = V[-1] - V[-2]
    steps = np.arange(1, extra + 1).reshape((-1,) + (1,) * (V.ndim - 1))
    ext = V[-1][None, ...] + steps * slope[None, ...]
    return np.moveaxis(np.concatenate([V, ext], axis=0), 0, axis)


def _trapezoid_weights(K1: int, K2: int) -> np.ndarray:
    w = np.ones((K1 + 1, K2 + 1))
    w[0, :] *= 0.5
    w[-1, :] *= 0.5
    w[:, 0] *= 0.5
    w[:, -1] *= 0.5
    return w


class HJBSolver:
    """Bundles precomputed operators for one (model, plant, copula, grid)."""

    def __init__(
        self,
        model: ModelSpec,
        plant: PlantSpec,
        copula: CopulaSpec,
        grid: GridSpec,
    ):
        self.model = model
        self.plant = plant
        self.copula = copula
        self.grid = resolve_grid(grid, model, plant)
        g = self.grid

        self.s_e = g.s_e_nodes()
        self.s_g = g.s_g_nodes()
        self.l_nodes = g.l_nodes(plant)
        self.dL = g.dL(plant)
        self.n_regimes = len(model.regimes)

        self.H_u = output(plant, self.l_nodes)
        self.c_min_u, self.c_max_u = control_bounds(plant, self.l_nodes)
        # ascending candidate grids: first argmax hit = smallest optimal c
        q = np.linspace(0.0, 1.0, g.N_c)
        self.c_cand = self.c_min_u[:, None] + q[None, :] * (self.c_max_u - self.c_min_u)[:, None]
        self.a_cand = plant.eta * (equilibrium_temp(plant, self.c_cand) - self.l_nodes[:, None])

        # per-regime jump machinery
        self.A_e: list[Optional[np.ndarray]] = []
        self.A_g: list[Optional[np.ndarray]] = []
        self.cross_kernel: list[Optional[np.ndarray]] = []
        for reg in model.regimes:
            if reg.jump_e.intensity > 0:
                nu_e = marginal_cell_masses(reg.jump_e, g.dS_e, g.K_e)
                self.A_e.append(_marginal_jump_matrix(nu_e, g.N_e + 1, g.dS_e))
            else:
                self.A_e.append(None)
            if reg.jump_g.intensity > 0 and g.N_g > 0:
                nu_g = marginal_cell_masses(reg.jump_g, g.dS_g, g.K_g)
                self.A_g.append(_marginal_jump_matrix(nu_g, g.N_g + 1, g.dS_g))
            else:
                self.A_g.append(None)
            use_cross = (
                g.N_g > 0
                and not isinstance(copula, Independence)
                and reg.jump_e.intensity > 0
                and reg.jump_g.intensity > 0
            )
            if use_cross:
                z_e = np.arange(g.K_e + 1) * g.dS_e
                z_g = np.arange(g.K_g + 1) * g.dS_g
                fbar = joint_tail(copula, reg.jump_e, reg.jump_g, z_e[:, None], z_g[None, :])
                kernel = _trapezoid_weights(g.K_e, g.K_g) * fbar * g.dS_e * g.dS_g
                self.cross_kernel.append(kernel)
            else:
                self.cross_kernel.append(None)

    # ------------------------------------------------------------------
    # spatial operators (all return full (N_e+1, N_g'+1, N_L+1) arrays)

    def drift_e(self, tau: float, regime: int) -> np.ndarray:
        reg = self.model.regimes[regime]
        t = self.model.horizon - tau
        return effective_drift(reg, self.s_e, t, "electricity", self.model.drift_convention)

    def drift_g(self, tau: float, regime: int) -> np.ndarray:
        reg = self.model.regimes[regime]
        t = self.model.horizon - tau
        return effective_drift(reg, self.s_g, t, "gas", self.model.drift_convention)

    def diffusion_operator(self, V: np.ndarray, regime: int, tau: float) -> np.ndarray:
        """Diffusion + drift + discounting, with boundary-reduced stencils."""
        g = self.grid
        reg = self.model.regimes[regime]
        out = np.zeros_like(V)

        out[1:-1] += 0.5 * reg.sigma_e**2 / g.dS_e**2 * (V[2:] - 2 * V[1:-1] + V[:-2])
        if g.N_g > 0:
            out[:, 1:-1] += (
                0.5 * reg.sigma_g**2 / g.dS_g**2 * (V[:, 2:] - 2 * V[:, 1:-1] + V[:, :-2])
            )
            if reg.rho != 0 and reg.sigma_e > 0 and reg.sigma_g > 0:
                coef = reg.rho * reg.sigma_e * reg.sigma_g / (2 * g.dS_e * g.dS_g)
                if reg.rho > 0:
                    sten = (
                        V[2:, 2:]
                        + V[:-2, :-2]
                        + 2 * V[1:-1, 1:-1]
                        - V[1:-1, 2:]
                        - V[1:-1, :-2]
                        - V[2:, 1:-1]
                        - V[:-2, 1:-1]
                    )
                else:
                    sten = -(
                        V[2:, :-2]
                        + V[:-2, 2:]
                        + 2 * V[1:-1, 1:-1]
                        - V[1:-1, 2:]
                        - V[1:-1, :-2]
                        - V[2:, 1:-1]
                        - V[:-2, 1:-1]
                    )
                out[1:-1, 1:-1] += coef * sten

        mu_e = self.drift_e(tau, regime)[:, None, None]
        fwd = np.empty_like(V)
        fwd[:-1] = (V[1:] - V[:-1]) / g.dS_e
        fwd[-1] = 0.0
        bwd = np.empty_like(V)
        bwd[1:] = (V[1:] - V[:-1]) / g.dS_e
        bwd[0] = 0.0
        upw = np.where(mu_e >= 0, fwd, bwd)
        upw[0] = fwd[0]  # one-sided inward at S_e = 0
        upw[-1] = bwd[-1]  # one-sided inward at S_e = S_e_max
        out += mu_e * upw

        if g.N_g > 0:
            mu_g = self.drift_g(tau, regime)[None, :, None]
            fwd = np.empty_like(V)
            fwd[:, :-1] = (V[:, 1:] - V[:, :-1]) / g.dS_g
            fwd[:, -1] = 0.0
            bwd = np.empty_like(V)
            bwd[:, 1:] = (V[:, 1:] - V[:, :-1]) / g.dS_g
            bwd[:, 0] = 0.0
            upw = np.where(mu_g >= 0, fwd, bwd)
            upw[:, 0] = fwd[:, 0]
            upw[:, -1] = bwd[:, -1]
            out += mu_g * upw

        out -= self.model.discount_rate * V
        return out

    def marginal_jump_operator_e(self, V: np.ndarray, regime: int) -> np.ndarray:
        A = self.A_e[regime]
        if A is None:
            return np.zeros_like(V)
        return np.tensordot(A, V, axes=(1, 0))

    def marginal_jump_operator_g(self, V: np.ndarray, regime: int) -> np.ndarray:
        A = self.A_g[regime]
        if A is None:
            return np.zeros_like(V)
        return np.moveaxis(np.tensordot(A, V, axes=(1, 1)), 0, 1)

    def cross_jump_operator(self, V: np.ndarray, regime: int) -> np.ndarray:
        kernel = self.cross_kernel[regime]
        out = np.zeros_like(V)
        if kernel is None:
            return out
        g = self.grid
        Vx = _extend_linear(V, 0, g.K_e)
        Vx = _extend_linear(Vx, 1, g.K_g)
        T = fftconvolve(Vx, kernel[::-1, ::-1, None], mode="valid", axes=(0, 1))
        inner = (T[2:, 2:] - T[2:, :-2] - T[:-2, 2:] + T[:-2, :-2]) / (4 * g.dS_e * g.dS_g)
        out[1:-1, 1:-1] = inner
        return out

    # ------------------------------------------------------------------
    # control optimization and advection

    def _dl_differences(self, V: np.ndarray):
        """Forward/backward temperature differences with one-sided edges."""
        dfwd = np.empty_like(V)
        dfwd[..., :-1] = (V[..., 1:] - V[..., :-1]) / self.dL
        dbwd = np.empty_like(V)
        dbwd[..., 1:] = (V[..., 1:] - V[..., :-1]) / self.dL
        dfwd[..., -1] = dbwd[..., -1]
        dbwd[..., 0] = dfwd[..., 0]
        return dfwd, dbwd

    def optimize_control(self, V: np.ndarray, regime: int):
        """Per-node argmax of the fuel-burn Hamiltonian.

        Returns (c_star, hamiltonian); the temperature derivative is
        upwinded by the sign of the candidate's own drift.  Ties go to
        the smallest fuel rate.
        """
        p = self.plant
        dfwd, dbwd = self._dl_differences(V)
        c_star = np.empty_like(V)
        ham = np.empty_like(V)
        cost = self.s_g[None, :, None]  # S_g_j, broadcast over (i, j, q)
        for u in range(self.grid.N_L + 1):
            c_u = self.c_cand[u]  # (N_c,)
            a_u = self.a_cand[u]
            Df = dfwd[..., u]
            Db = dbwd[..., u]
            obj = -cost * c_u[None, None, :] + np.where(
                a_u[None, None, :] >= 0,
                a_u[None, None, :] * Df[..., None],
                a_u[None, None, :] * Db[..., None],
            )
            best_q = np.argmax(obj, axis=-1)
            best_val = np.take_along_axis(obj, best_q[..., None], axis=-1)[..., 0]
            best_c = c_u[best_q]
            # quadratic-in-c objective: interior stationary point candidates
            sg = self.s_g[None, :]
            for D in (Df, Db):
                with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                    c_s = p.b2 - sg / (2 * p.eta * p.b1 * D)
                c_s = np.where(D > 0, c_s, self.c_min_u[u])
                c_s = np.clip(c_s, self.c_min_u[u], self.c_max_u[u])
                a_s = p.eta * (equilibrium_temp(p, c_s) - self.l_nodes[u])
                val = -sg * c_s + np.where(a_s >= 0, a_s * Df, a_s * Db)
                better = (val > best_val) | ((val == best_val) & (c_s < best_c))
                best_val = np.where(better, val, best_val)
                best_c = np.where(better, c_s, best_c)
            c_star[..., u] = best_c
            ham[..., u] = self.H_u[u] * self.s_e[:, None] + best_val
        return c_star, ham

    def advection_update(self, V: np.ndarray, c_star: np.ndarray, dtau: float) -> np.ndarray:
        """V + dtau * payoff + MUSCL-limited temperature transport.

        Ghost nodes replicate the edge values (temperature is clamped to
        its physical range), which keeps the update TVD.
        """
        p = self.plant
        a = p.eta * (equilibrium_temp(p, c_star) - self.l_nodes[None, None, :])
        zeta = dtau * a / self.dL
        worst = float(np.max(np.abs(zeta))) if zeta.size else 0.0
        if worst > 1.0 + 1e-12:
            raise NumericalError(f"advection CFL violated: |zeta| = {worst:.3f} > 1")

        Vp = np.concatenate([V[..., :1], V, V[..., -1:]], axis=-1)  # ghosts at both ends
        dV = Vp[..., 1:] - Vp[..., :-1]  # (.., N_L+2), dV[u] = Vp[u+1]-Vp[u]
        slopes = minmod(dV[..., :-1] / self.dL, dV[..., 1:] / self.dL)  # at real nodes
        sp = np.concatenate(
            [np.zeros_like(slopes[..., :1]), slopes, np.zeros_like(slopes[..., :1])], axis=-1
        )
        ds = sp[..., 1:] - sp[..., :-1]

        # V_tau = ... + a V_L transports information from larger L when
        # a > 0, so the upwind side is the forward difference there
        pos = zeta > 0
        flux = np.where(pos, dV[..., 1:], dV[..., :-1])
        sdiff = np.where(pos, ds[..., 1:], ds[..., :-1])
        payoff = self.H_u[None, None, :] * self.s_e[:, None, None] - self.s_g[None, :, None] * c_star
        return (
            V
            + dtau * payoff
            + zeta * flux
            - 0.5 * zeta * (np.sign(zeta) - zeta) * self.dL * sdiff
        )

    # ------------------------------------------------------------------
    # time stepping

    def spatial_operator(self, V: np.ndarray, regime: int, tau: float) -> np.ndarray:
        return (
            self.diffusion_operator(V, regime, tau)
            + self.marginal_jump_operator_e(V, regime)
            + self.marginal_jump_operator_g(V, regime)
            + self.cross_jump_operator(V, regime)
        )

    def apply_boundary_conditions(self, V: np.ndarray, regime: int, tau: float) -> np.ndarray:
        """Spatial-operator values with interior nodes masked out.

        The boundary reductions (dropped normal second derivatives and
        jump operators, inward one-sided drift) are built into the
        component operators; this restricts the result to the price
        boundary shell for inspection and testing.
        """
        out = self.spatial_operator(V, regime, tau).copy()
        if self.grid.N_g > 0:
            out[1:-1, 1:-1] = 0.0
        else:
            out[1:-1] = 0.0
        return out

    def step(self, V: np.ndarray, tau: float, dtau: float):
        """One explicit step for all regimes from time level tau.

        Returns (V_new, c_star) with c_star the controls used at this
        level.  Both regimes read level-n data only.
        """
        V_new = np.empty_like(V)
        c_all = np.empty_like(V)
        for l in range(self.n_regimes):
            c_star, _ = self.optimize_control(V[l], l)
            rhs = self.spatial_operator(V[l], l, tau)
            if self.n_regimes == 2:
                rhs = rhs + self.model.regimes[l].switch_rate * (V[1 - l] - V[l])
            V_new[l] = self.advection_update(V[l], c_star, dtau) + dtau * rhs
            c_all[l] = c_star
        if not np.all(np.isfinite(V_new)):
            raise NumericalError(
                f"non-finite lattice values at tau = {tau + dtau:.6g}; "
                "reduce the time step or check the configuration"
            )
        return V_new, c_all

    def payoff_bound(self) -> float:
        g, p = self.grid, self.plant
        return self.model.horizon * (
            output(p, p.L_max) * g.S_e_max + p.c_abs_max * max(g.S_g_max, 0.0)
        )

    def solve(self, snapshots: Sequence[float] = ()) -> SolveResult:
        """March from V = 0 at tau = 0 to tau = horizon.

        Snapshots are recorded at the nearest time-grid levels; the
        final level is always included.
        """
        g = self.grid
        T = self.model.horizon
        for s in snapshots:
            if not 0 <= s <= T + 1e-9:
                raise ValueError(f"snapshot tau = {s} outside [0, {T}]")
        M = g.M
        dtau = T / M
        snap_idx = sorted({min(M, round(s / dtau)) for s in snapshots} | {M})

        shape = (self.n_regimes, g.N_e + 1, len(self.s_g), g.N_L + 1)
        V = np.zeros(shape)
        taken: list[Lattice] = []
        pol_taus: list[float] = []
        pol_controls: list[np.ndarray] = []
        t0 = time.perf_counter()
        pending = list(snap_idx)
        for n in range(M + 1):
            tau = n * dtau
            if pending and n == pending[0]:
                pending.pop(0)
                taken.append(Lattice(V.copy(), n, tau, g))
                c_snap = np.stack(
                    [self.optimize_control(V[l], l)[0] for l in range(self.n_regimes)]
                )
                pol_taus.append(tau)
                pol_controls.append(c_snap)
            if n < M:
                V, _ = self.step(V, tau, dtau)

        policy = PolicySurface(np.asarray(pol_taus), np.stack(pol_controls))
        final = taken[-1]
        return SolveResult(
            snapshots=taken,
            policy=policy,
            final=final,
            grid=g,
            dtau=dtau,
            wall_time=time.perf_counter() - t0,
        )


def solve(
    model: ModelSpec,
    plant: PlantSpec,
    copula: CopulaSpec,
    grid: GridSpec,
    snapshots: Sequence[float] = (),
) -> SolveResult:
    """Convenience wrapper: build a solver and run it."""
    return HJBSolver(model, plant, copula, grid).solve(snapshots)
