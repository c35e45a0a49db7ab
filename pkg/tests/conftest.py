"""Shared pytest fixtures."""
from __future__ import annotations

import pytest

from sdlab.config import ScenarioConfig
from sdlab.core.elliptic import assemble
from sdlab.core.geometry import GridKind, build_grid

_ENV_VARS = ("SDLAB_OUTPUT_ROOT", "SDLAB_WORKERS", "SDLAB_LOG_LEVEL", "SDLAB_PLOTDATA")


@pytest.fixture
def isolated_config(tmp_path, monkeypatch):
    """Point the user config at tmp_path and clear SDLAB_* variables."""
    config_dir = tmp_path / ".sdlab"
    monkeypatch.setattr("sdlab.config._CONFIG_DIR", config_dir)
    monkeypatch.setattr("sdlab.config._CONFIG_FILE", config_dir / "config.yaml")
    for var in _ENV_VARS:
        monkeypatch.delenv(var, raising=False)
    monkeypatch.chdir(tmp_path)
    return config_dir / "config.yaml"


@pytest.fixture
def coarse_scenario(tmp_path):
    """A scenario cheap enough for end-to-end runs."""
    return ScenarioConfig.model_validate(
        {
            "solver": {"schedule_max_exponent": 10},
            "refinement": {"levels": [16, 32, 64]},
            "output": {"directory": str(tmp_path / "out")},
        }
    )


@pytest.fixture
def interval_op():
    return assemble(build_grid(GridKind.INTERVAL, 1, 99))


@pytest.fixture
def disk_op():
    return assemble(build_grid(GridKind.RADIAL_BALL, 2, 100))
