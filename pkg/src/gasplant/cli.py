"""Command-line entry point: solve, validate, or simulate a configuration.

Exports value/control surfaces as CSV (one file per regime, snapshot and
surface kind) with a JSON metadata sidecar carrying the full config echo,
resolved grid geometry, time step, wall time and a grid hash; simulate
mode reloads a previously exported policy and refuses to run against a
mismatched grid.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, config_echo, parse_config
from .copula import SkewedClayton, copula_value, joint_cell_masses
from .market import JumpSpec, PointMass, tail_integral
from .oracle import PathConfig, evaluate_policy_mc
from .plant import control_bounds
from .solver import (
    GridSpec,
    HJBSolver,
    NumericalError,
    PolicySurface,
    SolveResult,
    minmod,
    resolve_grid,
    stability_bound,
)

__all__ = [
    "grid_hash",
    "export_surfaces",
    "load_policy",
    "emit_plot_scripts",
    "run",
    "main",
]


def grid_hash(grid: GridSpec, l_min: float, l_max: float) -> str:
    """Stable hash of the lattice geometry a policy surface lives on."""
    key = {
        "s_e_max": grid.S_e_max, "s_g_max": grid.S_g_max,
        "n_e": grid.N_e, "n_g": grid.N_g, "n_l": grid.N_L,
        "l_min": l_min, "l_max": l_max,
    }
    blob = json.dumps(key, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _write_surface(path: Path, kind: str, values: np.ndarray,
                   s_e: np.ndarray, s_g: np.ndarray, l_nodes: np.ndarray):
    """Row-major (i, j, u) CSV dump with 9 significant digits."""
    rows = [f"S_e,S_g,L,{kind}"]
    for i, se in enumerate(s_e):
        for j, sg in enumerate(s_g):
            for u, lv in enumerate(l_nodes):
                rows.append(f"{se:.9g},{sg:.9g},{lv:.9g},{values[i, j, u]:.9g}")
    path.write_text("\n".join(rows) + "\n", encoding="utf-8", newline="\n")


def export_surfaces(result: SolveResult, cfg: RunConfig, out_dir: Path) -> dict:
    """Write all value/control CSVs plus metadata.json; returns the metadata."""
    out_dir.mkdir(parents=True, exist_ok=True)
    g = result.grid
    plant = cfg.plant
    s_e = g.s_e_nodes()
    s_g = g.s_g_nodes()
    l_nodes = g.l_nodes(plant)
    c_lo, c_hi = control_bounds(plant, l_nodes)

    files = []
    n_regimes = result.final.values.shape[0]
    for k, lat in enumerate(result.snapshots):
        tau = result.policy.taus[k]
        for l in range(n_regimes):
            vname = f"value_r{l}_snap{k:03d}.csv"
            _write_surface(out_dir / vname, "value", lat.values[l], s_e, s_g, l_nodes)
            files.append({"file": vname, "kind": "value", "regime": l, "tau": float(tau)})

            ctrl = result.policy.controls[k, l]
            tol = 1e-9 * max(1.0, plant.c_abs_max)
            if np.any(ctrl < c_lo[None, None, :] - tol) or np.any(
                ctrl > c_hi[None, None, :] + tol
            ):
                raise NumericalError("exported control violates the ramp-rate bounds")
            cname = f"control_r{l}_snap{k:03d}.csv"
            _write_surface(out_dir / cname, "control", ctrl, s_e, s_g, l_nodes)
            files.append({"file": cname, "kind": "control", "regime": l, "tau": float(tau)})

    meta = {
        "config": config_echo(cfg),
        "grid": {
            "s_e_max": g.S_e_max, "s_g_max": g.S_g_max,
            "n_e": g.N_e, "n_g": g.N_g, "n_l": g.N_L,
            "m": g.M, "b_e": g.B_e, "b_g": g.B_g,
            "k_e": g.K_e, "k_g": g.K_g, "n_c": g.N_c,
            "l_min": plant.L_min, "l_max": plant.L_max,
        },
        "grid_hash": grid_hash(g, plant.L_min, plant.L_max),
        "delta_tau": result.dtau,
        "wall_time": result.wall_time,
        "snapshot_taus": [float(t) for t in result.policy.taus],
        "files": files,
    }
    (out_dir / "metadata.json").write_text(
        json.dumps(meta, indent=2) + "\n", encoding="utf-8", newline="\n"
    )
    return meta


def load_policy(out_dir: Path, cfg: RunConfig) -> PolicySurface:
    """Rebuild a PolicySurface from a previous export in out_dir.

    Refuses to load if the stored grid hash does not match the current
    configuration's lattice geometry.
    """
    meta_path = out_dir / "metadata.json"
    if not meta_path.is_file():
        raise ConfigError(f"no metadata.json in {out_dir}; run solve mode first")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    expect = grid_hash(resolve_grid(cfg.grid, cfg.model, cfg.plant),
                       cfg.plant.L_min, cfg.plant.L_max)
    if meta.get("grid_hash") != expect:
        raise ConfigError(
            "grid hash mismatch: stored policy was produced on a different lattice "
            f"({meta.get('grid_hash')} != {expect})"
        )
    g = cfg.grid
    n_g_nodes = 1 if g.N_g == 0 else g.N_g + 1
    shape = (g.N_e + 1, n_g_nodes, g.N_L + 1)
    taus = meta["snapshot_taus"]
    n_regimes = len(cfg.model.regimes)
    controls = np.empty((len(taus), n_regimes) + shape)
    by_key = {
        (f["kind"], f["regime"], round(f["tau"], 9)): f["file"] for f in meta["files"]
    }
    for k, tau in enumerate(taus):
        for l in range(n_regimes):
            key = ("control", l, round(tau, 9))
            if key not in by_key:
                raise ConfigError(f"missing control surface for regime {l}, tau {tau}")
            data = np.loadtxt(out_dir / by_key[key], delimiter=",", skiprows=1)
            controls[k, l] = data[:, 3].reshape(shape)
    return PolicySurface(np.asarray(taus, dtype=float), controls)


# ----------------------------------------------------------------------
# plot-script emission

_PLOT_TEMPLATE = '''\
"""Auto-generated surface plot: {title}."""
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

data = np.loadtxt({csv!r}, delimiter=",", skiprows=1)
mask = np.isclose(data[:, {fix_col}], {fix_val!r})
x = np.unique(data[mask, {x_col}])
y = np.unique(data[mask, {y_col}])
z = data[mask, 3].reshape(len(x), len(y))
X, Y = np.meshgrid(x, y, indexing="ij")

fig = plt.figure(figsize=(7, 5))
ax = fig.add_subplot(projection="3d")
ax.plot_surface(X, Y, z, cmap="viridis", linewidth=0)
ax.set_xlabel({xlabel!r})
ax.set_ylabel({ylabel!r})
ax.set_zlabel({zlabel!r})
ax.set_title({title!r})
fig.savefig({png!r}, dpi=150, bbox_inches="tight")
print("wrote", {png!r})
'''

_AXES = ("S_e", "S_g", "L")


def emit_plot_scripts(cfg: RunConfig, out_dir: Path, meta: dict) -> list[Path]:
    """One self-contained matplotlib script per configured slice.

    Slices come in three families: value/control over (S_e, L) at fixed
    S_g, over (S_g, L) at fixed S_e, and over (S_e, S_g) at fixed L.
    Scripts read the final-snapshot CSVs of each regime and write PNGs.
    """
    final_tau = meta["snapshot_taus"][-1]
    finals = [f for f in meta["files"] if abs(f["tau"] - final_tau) < 1e-9]
    slices = []
    for sg in cfg.plots.s_g:
        slices.append((1, sg, 0, 2))  # fix S_g, plot over (S_e, L)
    for se in cfg.plots.s_e:
        slices.append((0, se, 1, 2))  # fix S_e, plot over (S_g, L)
    for lv in cfg.plots.L:
        slices.append((2, lv, 0, 1))  # fix L, plot over (S_e, S_g)

    written = []
    for f in finals:
        for fix_col, fix_val, x_col, y_col in slices:
            nodes = _slice_nodes(cfg, fix_col)
            fix_snap = float(nodes[np.argmin(np.abs(nodes - fix_val))])
            stem = (
                f"plot_{f['kind']}_r{f['regime']}"
                f"_{_AXES[fix_col].lower().replace('_', '')}{fix_snap:g}"
            )
            title = f"{f['kind']} vs ({_AXES[x_col]}, {_AXES[y_col]}) at {_AXES[fix_col]} = {fix_snap:g}"
            script = _PLOT_TEMPLATE.format(
                title=title,
                csv=f["file"],
                fix_col=fix_col,
                fix_val=fix_snap,
                x_col=x_col,
                y_col=y_col,
                xlabel=_AXES[x_col],
                ylabel=_AXES[y_col],
                zlabel=f["kind"],
                png=stem + ".png",
            )
            path = out_dir / (stem + ".py")
            path.write_text(script, encoding="utf-8", newline="\n")
            written.append(path)
    return written


def _slice_nodes(cfg: RunConfig, axis: int) -> np.ndarray:
    g = resolve_grid(cfg.grid, cfg.model, cfg.plant)
    if axis == 0:
        return g.s_e_nodes()
    if axis == 1:
        return g.s_g_nodes()
    return g.l_nodes(cfg.plant)


# ----------------------------------------------------------------------
# validate mode

def _validate_properties(cfg: RunConfig):
    """Cheap structural checks; yields (name, passed, measure) triples."""
    cop = cfg.copula if isinstance(cfg.copula, SkewedClayton) else SkewedClayton(1.0, 0.5, 1.0)

    x = np.linspace(0.05, 4.0, 40)
    err = float(np.max(np.abs(copula_value(cop, x, np.inf) - x)))
    yield "copula margin recovery F(x, inf) = x", err < 1e-9, err

    je = JumpSpec(1.0, PointMass(1.0))
    m = joint_cell_masses(cop, je, je, 0.2, 0.2, 20, 20)
    worst = float(m.min())
    yield "copula cell masses nonnegative", worst >= 0.0, worst

    reg = cfg.model.regimes[0]
    tails = tail_integral(reg.jump_e, np.linspace(0.0, 5.0, 50))
    mono = float(np.max(np.diff(tails)))
    yield "marginal tail integral nonincreasing", mono <= 1e-12, mono

    l_nodes = np.linspace(cfg.plant.L_min, cfg.plant.L_max, 101)
    lo, hi = control_bounds(cfg.plant, l_nodes)
    gap = float(np.min(hi - lo))
    yield "control bounds ordered c_min <= c_max", gap >= -1e-9, gap

    dtau = stability_bound(cfg.grid, cfg.model, cfg.plant)
    yield "stability bound positive", dtau > 0, dtau

    a = np.array([1.0, -1.0, 2.0, 0.0])
    b = np.array([2.0, -3.0, -1.0, 5.0])
    mm = minmod(a, b)
    ok = bool(np.all(np.abs(mm) <= np.minimum(np.abs(a), np.abs(b)) + 1e-15))
    yield "minmod bounded by both arguments", ok, float(np.max(np.abs(mm)))


def _run_validate(cfg: RunConfig) -> int:
    failures = 0
    for name, passed, measure in _validate_properties(cfg):
        status = "PASS" if passed else "FAIL"
        print(f"[{status}] {name} (measured: {measure:.6g})")
        failures += not passed
    return 0 if failures == 0 else 3


# ----------------------------------------------------------------------
# orchestration

def run(cfg: RunConfig) -> int:
    out_dir = Path(cfg.outputs)
    if cfg.mode == "validate":
        return _run_validate(cfg)

    if cfg.mode == "solve":
        solver = HJBSolver(cfg.model, cfg.plant, cfg.copula, cfg.grid)
        print(f"grid resolved: M = {solver.grid.M}, "
              f"delta_tau = {cfg.model.horizon / solver.grid.M:.6g}")
        result = solver.solve(cfg.snapshots)
        meta = export_surfaces(result, cfg, out_dir)
        print(f"solve finished in {result.wall_time:.2f} s; "
              f"exported {len(meta['files'])} surfaces to {out_dir}")
        if cfg.emit_plots:
            scripts = emit_plot_scripts(cfg, out_dir, meta)
            print(f"emitted {len(scripts)} plot scripts")
        return 0

    if cfg.mode == "simulate":
        policy = load_policy(out_dir, cfg)
        sim = cfg.simulate
        pc = PathConfig(
            step=sim.step, paths=sim.paths, seed=sim.seed,
            jump_dependence_mode=sim.jump_dependence_mode,
        )
        grid = resolve_grid(cfg.grid, cfg.model, cfg.plant)
        t0 = time.perf_counter()
        mean, se = evaluate_policy_mc(
            cfg.model, cfg.plant, grid, policy, pc,
            sim.start_s_e, sim.start_s_g, sim.start_L, sim.start_regime,
        )
        elapsed = time.perf_counter() - t0
        out = {
            "mean": mean, "standard_error": se,
            "paths": sim.paths, "seed": sim.seed, "wall_time": elapsed,
            "start": {"s_e": sim.start_s_e, "s_g": sim.start_s_g,
                      "L": sim.start_L, "regime": sim.start_regime},
        }
        (out_dir / "simulate_result.json").write_text(
            json.dumps(out, indent=2) + "\n", encoding="utf-8", newline="\n"
        )
        print(f"simulated value = {mean:.6g} +/- {se:.3g} ({sim.paths} paths, "
              f"{elapsed:.2f} s)")
        return 0

    raise ConfigError(f"unknown mode {cfg.mode!r}")


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    updates = {}
    if args.mode is not None:
        updates["mode"] = args.mode
    if args.out is not None:
        updates["outputs"] = args.out
    if args.snapshots is not None:
        try:
            snaps = tuple(float(s) for s in args.snapshots.split(",") if s.strip())
        except ValueError as e:
            raise ConfigError(f"bad --snapshots value: {e}") from e
        updates["snapshots"] = snaps
    if args.emit_plots:
        updates["emit_plots"] = True
    if args.seed is not None:
        updates["simulate"] = replace(cfg.simulate, seed=args.seed)
    return replace(cfg, **updates) if updates else cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gasplant",
        description="Value a gas-fired plant by solving the coupled pricing PIDEs.",
    )
    parser.add_argument("--config", required=True, help="path to a TOML run configuration")
    parser.add_argument("--mode", choices=["solve", "validate", "simulate"],
                        help="override the configured run mode")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("--snapshots", help="comma-separated tau values to record")
    parser.add_argument("--emit-plots", action="store_true",
                        help="also write plot scripts after a solve")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap BLAS/FFT worker threads")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the simulation seed")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as e:
        print(f"error: cannot read config: {e}", file=sys.stderr)
        return 4
    try:
        cfg = _apply_overrides(parse_config(text), args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2

    try:
        if args.threads is not None:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=args.threads):
                return run(cfg)
        return run(cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
