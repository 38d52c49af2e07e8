import json
from pathlib import Path

import pytest

ORACLES = json.loads((Path(__file__).parent / "oracles.json").read_text())


@pytest.fixture(scope="session")
def oracle():
    return ORACLES
