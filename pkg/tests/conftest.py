import pytest

_LINES = []


@pytest.fixture
def criterion():
    """Record and print one pass/fail line for an acceptance criterion."""

    def record(number, title, passed, detail, runtime, budget):
        within = runtime <= budget
        ok = passed and within
        line = (f"criterion {number:>2} {title:<34} {'PASS' if ok else 'FAIL'}  "
                f"[{detail}; runtime {runtime:.1f} s of {budget:g} s{'' if within else ' OVER BUDGET'}]")
        _LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
