import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion."""
    reports = []
    for key in ("passed", "failed"):
        reports.extend(terminalreporter.stats.get(key, []))
    acceptance = [
        r for r in reports if r.when == "call" and "test_acceptance.py" in r.nodeid
    ]
    if not acceptance:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for rep in sorted(acceptance, key=lambda r: r.nodeid):
        label = dict(rep.user_properties).get(
            "criterion", rep.nodeid.split("::")[-1]
        )
        status = "PASS" if rep.passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {label}")
