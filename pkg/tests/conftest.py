from __future__ import annotations

import numpy as np
import pytest

from arom.config import preset_config
from arom.driver import run_arom, run_hdm
from arom.presets import IMPLOSION, SOD

# criterion id -> (description, passed, detail); filled by tests/test_acceptance.py
CRITERIA: dict[int, tuple[str, bool, str]] = {}


def record(cid: int, description: str, passed: bool, detail: str = "") -> None:
    CRITERIA[cid] = (description, bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(CRITERIA):
        desc, ok, detail = CRITERIA[cid]
        terminalreporter.write_line(f"criterion {cid}: {'PASS' if ok else 'FAIL'} - {desc}" + (f" [{detail}]" if detail else ""))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def sod_problem():
    return SOD.problem()


@pytest.fixture(scope="session")
def sod_config():
    return preset_config(SOD)


@pytest.fixture(scope="session")
def sod_hdm(sod_problem, sod_config):
    return run_hdm(sod_problem, sod_config)


@pytest.fixture(scope="session")
def implosion_problem():
    return IMPLOSION.problem()


@pytest.fixture(scope="session")
def implosion_config():
    return preset_config(IMPLOSION)


@pytest.fixture(scope="session")
def implosion_hdm(implosion_problem, implosion_config):
    """Full 1650-step reference run (about ten minutes), shared by the implosion criteria."""
    return run_hdm(implosion_problem, implosion_config)


@pytest.fixture(scope="session")
def implosion_arom(implosion_problem, implosion_config, implosion_hdm):
    return run_arom(
        implosion_problem,
        implosion_config,
        reference=implosion_hdm.trajectory,
        t_H=implosion_hdm.wall,
        keep_trajectory=False,
        keep_masks=False,
    )
