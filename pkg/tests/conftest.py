"""Shared acceptance reporting: every criterion check records one line that
is echoed in the terminal summary, so pass/fail status per criterion is
visible regardless of capture settings."""

_CRITERION_LINES = []


def record_criterion(number: int, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    _CRITERION_LINES.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not _CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_CRITERION_LINES):
        terminalreporter.write_line(line)
