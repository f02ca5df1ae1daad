import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from planted import planted_panel, to_cube  # noqa: E402

from gpinow.ingest import write_panel_csv  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_workspace(root: Path, months=144, seed=2024, learners=("gbt", "elastic-net"),
                    grids=None, **extra) -> Path:
    """Panel CSV, annual GPI covering the panel, and a run config under ``root``."""
    pl = planted_panel(seed=seed, months=months)
    with open(root / "panel.csv", "w", newline="") as fh:
        write_panel_csv(to_cube(pl.features, "ZZ"), fh)
    gen = np.random.default_rng(seed)
    years = months // 12 + 1
    with open(root / "gpi.csv", "w") as fh:
        fh.write("country,year,score\n")
        for k in range(years):
            fh.write(f"ZZ,{2006 + k},{gen.uniform(1.5, 3.0):.3f}\n")
    doc = {"seed": 7, "gpi": "gpi.csv", "panel": "panel.csv", "output_dir": "out",
           "learners": list(learners),
           "grids": grids if grids is not None else {
               "gbt": {"n_estimators": [40], "max_depth": [2]},
               "elastic-net": {"lambda": [0.01]},
           }}
    doc.update(extra)
    path = root / "run.json"
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture
def workspace(tmp_path):
    return write_workspace(tmp_path)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance as acc

    if acc.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in acc.summary_lines():
            terminalreporter.write_line(line)
