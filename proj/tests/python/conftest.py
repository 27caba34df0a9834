import os
import pathlib

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[2]


@pytest.fixture
def data_dir():
    return pathlib.Path(os.environ.get("GRIDTRADE_DATA", ROOT / "data"))


@pytest.fixture
def two_bus(data_dir):
    return data_dir / "two_bus.json"


@pytest.fixture
def cli():
    exe = os.environ.get("GRIDTRADE_CLI")
    if not exe:
        pytest.skip("GRIDTRADE_CLI not set")
    return exe
