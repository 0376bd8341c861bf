import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import kddgen  # noqa: E402


@pytest.fixture(scope="session")
def synthetic_file(tmp_path_factory):
    return kddgen.write_file(tmp_path_factory.mktemp("kdd") / "synthetic.txt", scale=0.02, seed=7)


@pytest.fixture(scope="session")
def kdd_path():
    """Path to the real 10% subset, taken from $KDD_DATA."""
    path = os.environ.get("KDD_DATA")
    if not path or not Path(path).exists():
        pytest.skip("real KDD Cup 99 10% file not available (set KDD_DATA)")
    return Path(path)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS, key=str):
        status, detail = RESULTS[key]
        terminalreporter.write_line(f"criterion {key}: {status} - {detail}")
