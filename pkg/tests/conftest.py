from pathlib import Path

import pytest

from flowdialog.calendar import DEFAULT_NOW, Clock, EventStore
from flowdialog.functions import default_registry
from flowdialog.graph import GraphContext

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def registry():
    return default_registry()


@pytest.fixture
def ctx(registry):
    return GraphContext(registry=registry, store=EventStore(), clock=Clock(DEFAULT_NOW))


def make_ctx(registry, store_name: str | None = None):
    store = EventStore.from_file(FIXTURES / store_name) if store_name else EventStore()
    return GraphContext(registry=registry, store=store, clock=Clock(DEFAULT_NOW))


def golden_text(name: str) -> str:
    return (GOLDEN / name).read_text(encoding="utf-8").rstrip("\n")
