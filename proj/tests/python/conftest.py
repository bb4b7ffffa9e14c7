import os
import pathlib
import shutil

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[2]
GOLDEN = ROOT / "tests" / "golden"


@pytest.fixture
def golden():
    return GOLDEN


@pytest.fixture
def cli():
    path = os.environ.get("LSRLAB_CLI") or shutil.which("lsrlab")
    if not path:
        pytest.skip("lsrlab CLI not available")
    return path
