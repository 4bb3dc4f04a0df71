import hypothesis
import pytest

hypothesis.settings.register_profile(
    "default", max_examples=50, deadline=None,
)
hypothesis.settings.register_profile(
    "thorough", max_examples=300, deadline=None,
)
hypothesis.settings.load_profile("default")

# one line per acceptance criterion, echoed after the test summary so the
# verdicts are visible even with output capture on
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    def _report(criterion: str, ok: bool, detail: str) -> bool:
        line = f"[acceptance] criterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail})"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
