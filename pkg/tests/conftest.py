import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from openfsp.ontology import load_builtin_map  # noqa: E402
from openfsp.toy import generate_toy_corpus  # noqa: E402


@pytest.fixture(scope="session")
def psi():
    return load_builtin_map()


@pytest.fixture(scope="session")
def toy():
    return generate_toy_corpus()
