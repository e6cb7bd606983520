"""Shared builders for the test suite."""

from importlib import resources

import pytest

from gasplant.config import parse_config
from gasplant.market import (
    JumpSpec,
    ModelSpec,
    PointMass,
    RegimeParams,
    SeasonalityFn,
)


def flat_seasonality(level: float, shape: str = "sine") -> SeasonalityFn:
    return SeasonalityFn(amplitude=0.0, phase=0.0, period=24.0, offset=level, shape=shape)


def no_jumps() -> JumpSpec:
    return JumpSpec(intensity=0.0, size_dist=PointMass(1.0))


def degenerate_regime(s_e_level: float = 50.0, s_g_level: float = 10.0) -> RegimeParams:
    """No diffusion, no jumps, no mean reversion, constant seasonality."""
    return RegimeParams(
        alpha_e=0.0, alpha_g=0.0, sigma_e=0.0, sigma_g=0.0, rho=0.0,
        jump_e=no_jumps(), jump_g=no_jumps(),
        seasonality_e=flat_seasonality(s_e_level),
        seasonality_g=flat_seasonality(s_g_level, "cosine"),
    )


def degenerate_model(s_e_level: float = 50.0, s_g_level: float = 10.0,
                     horizon: float = 200.0, r: float = 0.05) -> ModelSpec:
    return ModelSpec(
        regimes=(degenerate_regime(s_e_level, s_g_level),),
        discount_rate=r,
        horizon=horizon,
    )


def shipped_config_text(name: str) -> str:
    return resources.files("gasplant.configs").joinpath(name + ".toml").read_text()


@pytest.fixture(scope="session")
def single_regime_config():
    return parse_config(shipped_config_text("single_regime"))


@pytest.fixture(scope="session")
def regime_switching_config():
    return parse_config(shipped_config_text("regime_switching"))


@pytest.fixture(scope="session")
def thompson_config():
    return parse_config(shipped_config_text("thompson_constgas"))
