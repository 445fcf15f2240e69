import numpy as np
import pytest

from cubicqn import synth_logistic

FIXTURE = dict(n=500, d=50, seed=7, flip=0.08)
FIXTURE_START_SCALE = 3.0


def fixture_problem(mu=0.0):
    return synth_logistic(FIXTURE["n"], FIXTURE["d"], seed=FIXTURE["seed"], flip=FIXTURE["flip"], mu=mu)


def fixture_start():
    return FIXTURE_START_SCALE * np.ones(FIXTURE["d"])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def fixture_logistic():
    return fixture_problem()


# acceptance criteria report: one line per criterion, printed after the run
ACCEPTANCE = {}


def report(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    ran = set()
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            name = rep.nodeid.rpartition("::")[2]
            if "test_acceptance.py" in rep.nodeid and name.startswith("test_"):
                ran.add(int(name.split("_")[1]))
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ran):
        ok, detail = ACCEPTANCE.get(n, (False, "(crashed before reporting)"))
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
