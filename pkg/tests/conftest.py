import pytest

_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record and print a one-line acceptance verdict, then assert it."""

    def record(name: str, ok: bool, detail: str = "") -> None:
        line = f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}" + (f" ({detail})" if detail else "")
        _LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
