import logging

import pytest

from researchpod.engine import Engine
from researchpod.evidence import EvidenceStore

# The planner logs a warning on unguided producer tie-breaks; tests assert on
# behavior, not log noise.
logging.getLogger("researchpod").setLevel(logging.ERROR)


@pytest.fixture
def store(tmp_path):
    return EvidenceStore(tmp_path / "store")


@pytest.fixture
def engine(tmp_path):
    return Engine(tmp_path / "ws")


@pytest.fixture(scope="module")
def module_engine(tmp_path_factory):
    """One engine per test module for read-mostly suites."""
    return Engine(tmp_path_factory.mktemp("ws"))


def run_to_done(engine, workflow, ticker="NVDA", persona=None, seed=7, **kwargs):
    record = engine.create_engagement(workflow, ticker, persona=persona, seed=seed, **kwargs)
    result = engine.run_engagement(record.engagement_id)
    return record, result
