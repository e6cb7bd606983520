"""TOML run-configuration parsing with strict schema checking.

Unknown keys are hard errors; every constraint violation names the
offending section and the invariant it breaks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .copula import Comonotone, CopulaSpec, Independence, SkewedClayton
from .market import (
    InverseGaussian,
    JumpSpec,
    ModelSpec,
    PointMass,
    RegimeParams,
    SeasonalityFn,
    TruncatedNormal,
)
from .plant import PlantSpec
from .solver import GridSpec

__all__ = [
    "ConfigError",
    "RunConfig",
    "SimulateConfig",
    "PlotSlices",
    "parse_config",
    "config_echo",
    "emit_toml",
]


class ConfigError(ValueError):
    """Malformed or invalid run configuration."""


@dataclass(frozen=True)
class SimulateConfig:
    step: float = 0.05
    paths: int = 1000
    seed: int = 0
    jump_dependence_mode: str = "none"
    start_s_e: float = 0.0
    start_s_g: float = 0.0
    start_L: float = 20.0
    start_regime: int = 0


@dataclass(frozen=True)
class PlotSlices:
    s_g: tuple[float, ...] = (0.0, 10.0, 14.0, 20.0)
    s_e: tuple[float, ...] = (0.0, 60.0, 150.0)
    L: tuple[float, ...] = (20.0, 300.0, 320.0, 420.0, 600.0)


@dataclass(frozen=True)
class RunConfig:
    model: ModelSpec
    plant: PlantSpec
    copula: CopulaSpec
    grid: GridSpec
    snapshots: tuple[float, ...]
    outputs: str
    emit_plots: bool
    mode: Literal["solve", "validate", "simulate"]
    simulate: SimulateConfig
    plots: PlotSlices

    def __post_init__(self):
        for s in self.snapshots:
            if not 0 <= s <= self.model.horizon:
                raise ConfigError(
                    f"snapshot tau = {s} outside [0, {self.model.horizon}]"
                )


_MISSING = object()


class _Section:
    """Dict wrapper that tracks consumed keys and reports leftovers."""

    def __init__(self, data: dict, path: str):
        if not isinstance(data, dict):
            raise ConfigError(f"[{path}] must be a table")
        self.data = data
        self.path = path
        self.seen: set[str] = set()

    def take(self, key: str, default=_MISSING):
        self.seen.add(key)
        if key in self.data:
            return self.data[key]
        if default is _MISSING:
            raise ConfigError(f"[{self.path}] missing required key '{key}'")
        return default

    def sub(self, key: str, required: bool = True) -> Optional["_Section"]:
        self.seen.add(key)
        if key not in self.data:
            if required:
                raise ConfigError(f"[{self.path}] missing required table '{key}'")
            return None
        return _Section(self.data[key], f"{self.path}.{key}" if self.path else key)

    def finish(self):
        extra = set(self.data) - self.seen
        if extra:
            where = self.path or "top level"
            raise ConfigError(f"unknown key(s) {sorted(extra)} in [{where}]")


def _size_dist(sec: _Section):
    kind = sec.take("kind")
    try:
        if kind == "inverse_gaussian":
            out = InverseGaussian(mu=float(sec.take("mu")), lam=float(sec.take("lam")))
        elif kind == "truncated_normal":
            out = TruncatedNormal(mean_=float(sec.take("mean")), sd=float(sec.take("sd")))
        elif kind == "point_mass":
            out = PointMass(z=float(sec.take("z")))
        else:
            raise ConfigError(f"[{sec.path}] unknown size distribution kind {kind!r}")
    except ValueError as e:
        raise ConfigError(f"[{sec.path}] {e}") from e
    sec.finish()
    return out


def _jump(sec: _Section) -> JumpSpec:
    intensity = float(sec.take("intensity"))
    if intensity > 0:
        dist = _size_dist(sec.sub("size_dist"))
    else:
        sub = sec.sub("size_dist", required=False)
        dist = _size_dist(sub) if sub is not None else PointMass(1.0)
    sec.finish()
    try:
        return JumpSpec(intensity=intensity, size_dist=dist)
    except ValueError as e:
        raise ConfigError(f"[{sec.path}] {e}") from e


def _seasonality(sec: _Section) -> SeasonalityFn:
    try:
        out = SeasonalityFn(
            amplitude=float(sec.take("amplitude")),
            phase=float(sec.take("phase", 0.0)),
            period=float(sec.take("period", 24.0)),
            offset=float(sec.take("offset", 0.0)),
            shape=sec.take("shape", "sine"),
        )
    except ValueError as e:
        raise ConfigError(f"[{sec.path}] {e}") from e
    sec.finish()
    return out


def _regime(sec: _Section) -> RegimeParams:
    try:
        out = RegimeParams(
            alpha_e=float(sec.take("alpha_e")),
            alpha_g=float(sec.take("alpha_g")),
            sigma_e=float(sec.take("sigma_e")),
            sigma_g=float(sec.take("sigma_g")),
            rho=float(sec.take("rho")),
            jump_e=_jump(sec.sub("jump_e")),
            jump_g=_jump(sec.sub("jump_g")),
            seasonality_e=_seasonality(sec.sub("seasonality_e")),
            seasonality_g=_seasonality(sec.sub("seasonality_g")),
            switch_rate=float(sec.take("switch_rate", 0.0)),
        )
    except ValueError as e:
        raise ConfigError(f"[{sec.path}] {e}") from e
    sec.finish()
    return out


def _copula(sec: Optional[_Section]) -> CopulaSpec:
    if sec is None:
        return Independence()
    variant = sec.take("variant")
    try:
        if variant == "skewed_clayton":
            out = SkewedClayton(
                theta=float(sec.take("theta")),
                alpha=float(sec.take("alpha", 0.0)),
                beta=float(sec.take("beta", 1.0)),
            )
        elif variant == "independence":
            out = Independence()
        elif variant == "comonotone":
            out = Comonotone()
        else:
            raise ConfigError(f"[{sec.path}] unknown copula variant {variant!r}")
    except ValueError as e:
        raise ConfigError(f"[{sec.path}] {e}") from e
    sec.finish()
    return out


def _plant(sec: Optional[_Section]) -> PlantSpec:
    if sec is None:
        return PlantSpec()
    kwargs = {}
    for name in (
        "L_min", "L_max", "L_gen", "output_slope", "output_intercept",
        "b0", "b1", "b2", "eta", "c_abs_max", "ramp_limit",
    ):
        v = sec.take(name, None)
        if v is not None:
            kwargs[name] = float(v)
    sec.finish()
    try:
        return PlantSpec(**kwargs)
    except ValueError as e:
        raise ConfigError(f"[plant] {e}") from e


def _grid(sec: _Section) -> GridSpec:
    def opt_int(key):
        v = sec.take(key, None)
        return None if v is None else int(v)

    def opt_float(key):
        v = sec.take(key, None)
        return None if v is None else float(v)

    try:
        out = GridSpec(
            S_e_max=float(sec.take("s_e_max")),
            S_g_max=float(sec.take("s_g_max")),
            N_e=int(sec.take("n_e")),
            N_g=int(sec.take("n_g")),
            N_L=int(sec.take("n_l")),
            M=opt_int("m"),
            B_e=opt_float("b_e"),
            B_g=opt_float("b_g"),
            K_e=opt_int("k_e"),
            K_g=opt_int("k_g"),
            N_c=int(sec.take("n_c", 64)),
        )
    except ValueError as e:
        raise ConfigError(f"[grid] {e}") from e
    sec.finish()
    return out


def parse_config(text: str) -> RunConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"TOML parse error: {e}") from e
    top = _Section(raw, "")

    msec = top.sub("model")
    regimes_raw = msec.take("regimes")
    if not isinstance(regimes_raw, list) or not regimes_raw:
        raise ConfigError("[model] 'regimes' must be a non-empty array of tables")
    regimes = tuple(
        _regime(_Section(r, f"model.regimes[{k}]")) for k, r in enumerate(regimes_raw)
    )
    try:
        model = ModelSpec(
            regimes=regimes,
            discount_rate=float(msec.take("discount_rate")),
            horizon=float(msec.take("horizon")),
            drift_convention=msec.take("drift_convention", "compensation-consistent"),
        )
    except ValueError as e:
        raise ConfigError(f"[model] {e}") from e
    msec.finish()

    plant = _plant(top.sub("plant", required=False))
    copula = _copula(top.sub("copula", required=False))
    grid = _grid(top.sub("grid"))

    rsec = top.sub("run", required=False)
    if rsec is not None:
        snapshots = tuple(float(s) for s in rsec.take("snapshots", [model.horizon]))
        outputs = str(rsec.take("outputs", "out"))
        emit_plots = bool(rsec.take("emit_plots", False))
        mode = rsec.take("mode", "solve")
        rsec.finish()
    else:
        snapshots, outputs, emit_plots, mode = (model.horizon,), "out", False, "solve"
    if mode not in ("solve", "validate", "simulate"):
        raise ConfigError(f"[run] unknown mode {mode!r}")

    ssec = top.sub("simulate", required=False)
    if ssec is not None:
        sim = SimulateConfig(
            step=float(ssec.take("step", 0.05)),
            paths=int(ssec.take("paths", 1000)),
            seed=int(ssec.take("seed", 0)),
            jump_dependence_mode=ssec.take("jump_dependence_mode", "none"),
            start_s_e=float(ssec.take("start_s_e", 0.0)),
            start_s_g=float(ssec.take("start_s_g", 0.0)),
            start_L=float(ssec.take("start_L", plant.L_min)),
            start_regime=int(ssec.take("start_regime", 0)),
        )
        ssec.finish()
    else:
        sim = SimulateConfig(start_L=plant.L_min)
    if sim.jump_dependence_mode not in ("none", "independent", "comonotone"):
        raise ConfigError(f"[simulate] unknown jump mode {sim.jump_dependence_mode!r}")

    psec = top.sub("plots", required=False)
    if psec is not None:
        plots = PlotSlices(
            s_g=tuple(float(v) for v in psec.take("s_g_slices", list(PlotSlices().s_g))),
            s_e=tuple(float(v) for v in psec.take("s_e_slices", list(PlotSlices().s_e))),
            L=tuple(float(v) for v in psec.take("l_slices", list(PlotSlices().L))),
        )
        psec.finish()
    else:
        plots = PlotSlices()

    top.finish()
    return RunConfig(
        model=model,
        plant=plant,
        copula=copula,
        grid=grid,
        snapshots=snapshots,
        outputs=outputs,
        emit_plots=emit_plots,
        mode=mode,
        simulate=sim,
        plots=plots,
    )


# ----------------------------------------------------------------------
# config echo (round-trips through parse_config)

def _seasonality_dict(f: SeasonalityFn) -> dict:
    return {
        "amplitude": f.amplitude, "phase": f.phase, "period": f.period,
        "offset": f.offset, "shape": f.shape,
    }


def _dist_dict(d) -> dict:
    if isinstance(d, InverseGaussian):
        return {"kind": "inverse_gaussian", "mu": d.mu, "lam": d.lam}
    if isinstance(d, TruncatedNormal):
        return {"kind": "truncated_normal", "mean": d.mean_, "sd": d.sd}
    return {"kind": "point_mass", "z": d.z}


def _jump_dict(j: JumpSpec) -> dict:
    return {"intensity": j.intensity, "size_dist": _dist_dict(j.size_dist)}


def _copula_dict(c: CopulaSpec) -> dict:
    if isinstance(c, SkewedClayton):
        return {"variant": "skewed_clayton", "theta": c.theta, "alpha": c.alpha, "beta": c.beta}
    if isinstance(c, Comonotone):
        return {"variant": "comonotone"}
    return {"variant": "independence"}


def config_echo(cfg: RunConfig) -> dict:
    """JSON-serializable echo of a RunConfig, sufficient to re-run it."""
    g = cfg.grid
    grid = {"s_e_max": g.S_e_max, "s_g_max": g.S_g_max, "n_e": g.N_e, "n_g": g.N_g,
            "n_l": g.N_L, "n_c": g.N_c}
    for key, v in (("m", g.M), ("b_e", g.B_e), ("b_g", g.B_g), ("k_e", g.K_e), ("k_g", g.K_g)):
        if v is not None:
            grid[key] = v
    p = cfg.plant
    return {
        "model": {
            "discount_rate": cfg.model.discount_rate,
            "horizon": cfg.model.horizon,
            "drift_convention": cfg.model.drift_convention,
            "regimes": [
                {
                    "alpha_e": r.alpha_e, "alpha_g": r.alpha_g,
                    "sigma_e": r.sigma_e, "sigma_g": r.sigma_g,
                    "rho": r.rho, "switch_rate": r.switch_rate,
                    "jump_e": _jump_dict(r.jump_e), "jump_g": _jump_dict(r.jump_g),
                    "seasonality_e": _seasonality_dict(r.seasonality_e),
                    "seasonality_g": _seasonality_dict(r.seasonality_g),
                }
                for r in cfg.model.regimes
            ],
        },
        "plant": {
            "L_min": p.L_min, "L_max": p.L_max, "L_gen": p.L_gen,
            "output_slope": p.output_slope, "output_intercept": p.output_intercept,
            "b0": p.b0, "b1": p.b1, "b2": p.b2, "eta": p.eta,
            "c_abs_max": p.c_abs_max, "ramp_limit": p.ramp_limit,
        },
        "copula": _copula_dict(cfg.copula),
        "grid": grid,
        "run": {
            "snapshots": list(cfg.snapshots), "outputs": cfg.outputs,
            "emit_plots": cfg.emit_plots, "mode": cfg.mode,
        },
        "simulate": {
            "step": cfg.simulate.step, "paths": cfg.simulate.paths,
            "seed": cfg.simulate.seed,
            "jump_dependence_mode": cfg.simulate.jump_dependence_mode,
            "start_s_e": cfg.simulate.start_s_e, "start_s_g": cfg.simulate.start_s_g,
            "start_L": cfg.simulate.start_L, "start_regime": cfg.simulate.start_regime,
        },
        "plots": {
            "s_g_slices": list(cfg.plots.s_g), "s_e_slices": list(cfg.plots.s_e),
            "l_slices": list(cfg.plots.L),
        },
    }


# ----------------------------------------------------------------------
# TOML emission (inverse of parse_config for round-trip checks)

def _toml_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {v!r}")


def _emit_table(out: list[str], path: str, data: dict, array_item: bool = False):
    scalars = {k: v for k, v in data.items() if not isinstance(v, (dict, list))}
    lists = {k: v for k, v in data.items()
             if isinstance(v, list) and not (v and isinstance(v[0], dict))}
    tables = {k: v for k, v in data.items() if isinstance(v, dict)}
    table_arrays = {k: v for k, v in data.items()
                    if isinstance(v, list) and v and isinstance(v[0], dict)}
    if path:
        out.append(("[[%s]]" if array_item else "[%s]") % path)
    for k, v in scalars.items():
        out.append(f"{k} = {_toml_scalar(v)}")
    for k, v in lists.items():
        out.append(f"{k} = {_toml_scalar(v)}")
    for k, v in tables.items():
        sub = f"{path}.{k}" if path else k
        _emit_table(out, sub, v)
    for k, items in table_arrays.items():
        sub = f"{path}.{k}" if path else k
        for item in items:
            _emit_table(out, sub, item, array_item=True)


def emit_toml(cfg: RunConfig) -> str:
    """Serialize a RunConfig to TOML text that parse_config accepts."""
    echo = config_echo(cfg)
    out: list[str] = []
    _emit_table(out, "", echo)
    return "\n".join(out) + "\n"
