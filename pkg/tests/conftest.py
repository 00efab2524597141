import os
import sys
from pathlib import Path

import hypothesis
import pytest

# Add project root
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

hypothesis.settings.register_profile("default", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))

from oqo_engine.fock_core import make_state  # noqa: E402
from oqo_engine.schemas import StateSpec  # noqa: E402


@pytest.fixture
def state_factory():
    """make_state from a compact spec string, e.g. state_factory("coherent:1,0", 40)."""

    def build(text: str, dim: int):
        return make_state(StateSpec.from_compact(text, dim))

    return build


@pytest.fixture
def random_state(state_factory):
    return state_factory("random_mixed:11,5", 40)
