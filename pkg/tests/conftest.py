from pathlib import Path

import pytest

DATA = Path(__file__).resolve().parents[1] / "data" / "fsdd_mfcc13.npz"


@pytest.fixture
def fsdd_npz():
    if not DATA.is_file():
        pytest.skip(f"{DATA} not present")
    return DATA
