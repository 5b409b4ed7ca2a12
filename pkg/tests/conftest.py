import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fallzone.core import default_zone_map  # noqa: E402
from fallzone.sim import adl_tour, simulate_session  # noqa: E402


@pytest.fixture(scope="session")
def zone_map():
    return default_zone_map()


@pytest.fixture(scope="session")
def short_session(zone_map):
    """A 60 s seeded ADL tour with at least one fall."""
    return simulate_session(adl_tour(zone_map, 60.0, seed=3, fall_fraction=0.1), zone_map)


@pytest.fixture(scope="session")
def corpus(zone_map):
    """Four seeded 180 s sessions, ingested: (sessions, logs)."""
    from fallzone.pipeline import ingest, simulate_corpus

    sessions = simulate_corpus(zone_map, 4, seed=7)
    return sessions, [ingest(s, zone_map) for s in sessions]


@pytest.fixture(scope="session")
def window_corpus():
    from fallzone.sim import labeled_window_corpus

    return labeled_window_corpus(500, 0.1, seed=7)


@pytest.fixture(scope="session")
def fall_model(window_corpus):
    from fallzone.fall_detector import train_fall_model

    X, labels = window_corpus
    return train_fall_model(X, labels)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
