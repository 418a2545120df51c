import pytest

from alarmpilots import AlarmSet, AlarmSource, build_tree

_verdicts = []


@pytest.fixture
def five_alarm_set():
    """Five sources with probabilities 0.6, 0.35, 0.3, 0.15, 0.15.

    Small enough to check every number by hand; used as the golden
    instance across the suite.
    """
    probs = [0.6, 0.35, 0.3, 0.15, 0.15]
    return AlarmSet(tuple(AlarmSource(i, p) for i, p in enumerate(probs)))


@pytest.fixture
def five_alarm_tree(five_alarm_set):
    return build_tree(five_alarm_set)


@pytest.fixture
def record_verdict():
    """Collect one PASS/FAIL line per acceptance criterion.

    The lines are replayed after the run summary so they stay visible
    regardless of output capturing.
    """

    def record(name: str, passed: bool, detail: str = ""):
        line = f"acceptance {name}: {'PASS' if passed else 'FAIL'}"
        if detail:
            line += f"  [{detail}]"
        _verdicts.append(line)
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _verdicts:
        terminalreporter.section("acceptance criteria")
        for line in _verdicts:
            terminalreporter.write_line(line)
