import pytest

from layerpot.quadrature import generate_rule
from layerpot.surface import ProlateSpheroid, UnitSphere


@pytest.fixture(scope="session")
def sphere():
    return UnitSphere()


@pytest.fixture(scope="session")
def sphere_rule_16(sphere):
    return generate_rule(sphere, 1 / 16)


@pytest.fixture(scope="session")
def sphere_rule_32(sphere):
    return generate_rule(sphere, 1 / 32)


@pytest.fixture(scope="session")
def sphere_rule_64(sphere):
    return generate_rule(sphere, 1 / 64)


@pytest.fixture(scope="session")
def spheroid_rule_64():
    return generate_rule(ProlateSpheroid(), 1 / 64)


ACCEPTANCE_LINES = []


def record(criterion, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion:>2}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
