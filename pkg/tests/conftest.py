import numpy as np
import pytest

from elderuq.mesh import build_grid, tag_boundaries
from elderuq.physics import PhysicalParams


@pytest.fixture
def params():
    return PhysicalParams()


@pytest.fixture
def small_grid():
    grid = build_grid(8, 4)
    return grid, tag_boundaries(grid)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def tiny_config(tmp_path, **stochastic):
    """An 8x4 campaign over a few hundredths of a year; solves in well under a second."""
    from elderuq.campaign.config import config_from_dict
    st = {"method": "gpc", "dim": 3, "poly_order": 2, "rule": "smolyak", "level": 1}
    st.update(stochastic)
    return config_from_dict({
        "grid": {"nx": 8, "ny": 4},
        "solver": {"dt_years": 0.01, "t_end_years": 0.04},
        "stochastic": st,
        "snapshots_years": [0.02, 0.04],
        "statistics": {"n_samples": 2000, "points": [[300.0, 75.0]]},
        "output_dir": str(tmp_path / "campaign"),
    })


@pytest.fixture
def tiny(tmp_path):
    return tiny_config(tmp_path)


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
