from pathlib import Path

import pytest

from ppcrowd import ProjectConfig

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture
def symmetric_cfg():
    """Target and refund budget equal: threshold belief is one half."""
    return ProjectConfig(
        provision_point=100.0,
        contribution_budget=100.0,
        belief_budget=10.0,
        belief_deadline=3,
        contribution_deadline=10,
    )


@pytest.fixture
def skewed_cfg():
    """Refund budget half the target."""
    return ProjectConfig(
        provision_point=100.0,
        contribution_budget=50.0,
        belief_budget=10.0,
        belief_deadline=3,
        contribution_deadline=10,
    )


@pytest.fixture
def scenario_dir():
    return SCENARIO_DIR


def all_scenario_files():
    return sorted(SCENARIO_DIR.glob("*.yaml"))
