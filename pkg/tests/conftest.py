import random
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from sessio.parser import parse_program

ROOT = Path(__file__).resolve().parent.parent
PROGRAMS = ROOT / "programs"

settings.register_profile("default", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

T_C = "rec z . +{Leaf: lin skip, Node: lin !Int ; z ; z}"
T_C1 = f"lin +{{Leaf: lin skip, Node: lin !Int ; ({T_C}) ; ({T_C})}} ; lin !Int"
T_C2 = f"lin +{{Leaf: lin skip ; lin !Int, Node: lin !Int ; ({T_C}) ; ({T_C}) ; lin !Int}}"


def load(name: str):
    return parse_program((PROGRAMS / f"{name}.apc").read_text())


@pytest.fixture
def rng():
    return random.Random(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
