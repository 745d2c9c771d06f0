import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from syncopt import cli


@pytest.fixture(scope="session")
def paper_scenario():
    return cli.load_scenario(cli.bundled_scenario_path())


@pytest.fixture(scope="session")
def paper_bundle(paper_scenario):
    return cli.run_design(paper_scenario)


@pytest.fixture(scope="session")
def paper_traces(paper_scenario, paper_bundle):
    return cli.run_learn(paper_scenario, paper_bundle)
