import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from aifpipe import kernels  # noqa: E402


@pytest.fixture(scope="session", autouse=True)
def _jit_warmup():
    kernels.warmup()
