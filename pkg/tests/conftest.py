import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    # Echo the per-criterion pass/fail lines past pytest's output capture.
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results:
            terminalreporter.write_line(line)
