import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

# (criterion, passed, detail) tuples filled in by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in sorted(ACCEPTANCE, key=lambda r: _order(r[0])):
        terminalreporter.write_line(f"criterion {label:>3}: {'PASS' if passed else 'FAIL'}  {detail}")


def _order(label):
    digits = "".join(c for c in label if c.isdigit())
    return int(digits), label
