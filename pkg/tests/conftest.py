import os

import pytest
from hypothesis import settings

from sumd.harness.experiments import ExperimentConfig, run_replay
from sumd.ingest import RatingRecord
from sumd.platform import PlatformConfig

settings.register_profile("ci", deadline=None, print_blob=True)
settings.register_profile("thorough", deadline=None, max_examples=500)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

# filled by the acceptance tests, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def tiny_records():
    """Three members: an owner whose first item z is a clean target, a member
    who fills the victim's neighbourhood, and the victim."""
    rows = [("o", "z")] + [("o", f"z{i}") for i in range(1, 6)]
    rows += [("w", "h0")] + [("w", f"a{i:02d}") for i in range(10)]
    rows += [("v", "h0")]
    return [RatingRecord(u, i, 1.0, seq) for seq, (u, i) in enumerate(rows)]


def tiny_world(mode, seed=0):
    cfg = ExperimentConfig(synthetic=None, dataset="unused", fractions=[1.0],
                           platform=PlatformConfig(mode=mode, seed=seed))
    return run_replay(cfg, records=tiny_records(), members={"o", "w", "v"})


@pytest.fixture
def world():
    return tiny_world
