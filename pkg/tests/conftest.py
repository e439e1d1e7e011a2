import json
import os

import pytest

DATA = os.path.join(os.path.dirname(__file__), "data")


def data_path(name):
    return os.path.join(DATA, name)


def load_json(name):
    with open(data_path(name), "r", encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture
def three_spot_ta():
    from obese_bw.model import ta_from_dict
    automaton, _ = ta_from_dict(load_json("three_spot.json"))
    return automaton


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance scoreboard collected by test_acceptance.py."""
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.SCOREBOARD:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.SCOREBOARD:
            terminalreporter.write_line(line)
