"""Shared pytest hooks.

The acceptance tests in test_acceptance.py map one-to-one onto the package's
release criteria.  This hook prints a single PASS/FAIL line per criterion in
the terminal summary so the outcome of each criterion is visible even when
pytest collapses passing tests.
"""

import re


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = str(getattr(rep, "nodeid", ""))
            if "test_acceptance.py" not in nodeid:
                continue
            if getattr(rep, "when", "call") != "call" and outcome == "passed":
                continue
            name = nodeid.split("::")[-1]
            m = re.match(r"test_criterion_(\d+)_(\w+)", name)
            if not m:
                continue
            num = int(m.group(1))
            label = m.group(2).replace("_", " ")
            status = "PASS" if outcome == "passed" else "FAIL"
            # a failed setup/teardown overrides an earlier pass
            if results.get(num, ("", "PASS"))[1] == "FAIL":
                continue
            results[num] = (label, status)
    if results:
        terminalreporter.write_sep("-", "acceptance criteria")
        for num in sorted(results):
            label, status = results[num]
            terminalreporter.write_line(f"[{status}] criterion {num}: {label}")
