"""Shared pytest wiring.

Tests named ``test_criterion_<n>_*`` in test_acceptance.py roll up into one
PASS/FAIL line per criterion, printed after the normal summary so a full run
ends with the acceptance scorecard.
"""

import re

CRITERIA = {
    1: "finite-difference gradients for every learnable parameter class",
    2: "modulation filtering matches the double-loop convolution oracle",
    3: "identity degeneracies: full-band filter and M=0 bitwise baseline",
    4: "spectrogram contracts: frame count, tone bin, naive-DFT agreement",
    5: "ranking metrics match brute-force oracles under heavy ties",
    6: "synthetic AM task: modulation filters beat the baseline front end",
    7: "filter-count sweep CSV with small-M dominating M=8",
    8: "same-seed training runs are byte-identical modulo timing fields",
    9: "plateau schedule decays and switches optimizer at the exact epochs",
}

_NODE = re.compile(r"test_acceptance\.py::.*test_criterion_(\d+)")
_outcomes: dict = {}


def pytest_runtest_logreport(report):
    match = _NODE.search(report.nodeid)
    if match is None:
        return
    # call phase always counts; setup/teardown only when they went wrong
    if report.when == "call" or report.outcome != "passed":
        _outcomes.setdefault(int(match.group(1)), []).append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_outcomes):
        seen = _outcomes[num]
        if any(o == "failed" for o in seen):
            status = "FAIL"
        elif any(o == "skipped" for o in seen):
            status = "SKIP"
        else:
            status = "PASS"
        terminalreporter.write_line(f"criterion {num}: {status}  {CRITERIA.get(num, '')}")
