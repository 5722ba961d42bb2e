import sys


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance suite's one-line verdicts after the test run."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None) if mod else None
    if not lines:
        return
    terminalreporter.section("acceptance summary")
    for line in lines:
        terminalreporter.write_line(line)
