import re

import numpy as np

# ---------------------------------------------------------------------------
# acceptance summary
# ---------------------------------------------------------------------------
# Tests named test_cNN_* in test_acceptance.py are acceptance criteria; the
# terminal summary prints one pass/fail line per criterion.

CRITERIA = {
    1: "anchor filter support matches brute-force enumeration",
    2: "anchor filter uniformity (chi-square at 0.01)",
    3: "closed-form/recurrence placement equivalence",
    4: "curriculum minimum-anchor schedule values",
    5: "forward-process Monte-Carlo statistics",
    6: "sampler fixed point and convergence order",
    7: "finite-difference gradient correctness",
    8: "end-to-end loss halves in 2000 iterations",
    9: "denser anchors lower K-MPJPE",
    10: "curriculum training beats regular at f_n=3",
    11: "metric sanity values",
    12: "single-condition sampling totality",
}

_RESULTS: dict[int, str] = {}
_NOTES: dict[int, str] = {}


def acceptance_note(criterion: int, note: str):
    _NOTES[criterion] = note


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    m = re.search(r"test_c(\d\d)", report.nodeid)
    if not m:
        return
    key = int(m.group(1))
    if report.when == "call" or (report.when == "setup" and report.failed):
        status = "PASS" if report.passed else "FAIL"
        if report.when == "call" and report.skipped:
            status = "SKIP"
        if _RESULTS.get(key) == "FAIL":
            status = "FAIL"
        _RESULTS[key] = status


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_RESULTS):
        line = f"criterion {key:02d} [{_RESULTS[key]}] {CRITERIA[key]}"
        if key in _NOTES:
            line += f"  ({_NOTES[key]})"
        terminalreporter.write_line(line)


def central_diff(f, x, eps=1e-6):
    """Central finite-difference gradient of scalar f at x, entry by entry."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in np.ndindex(*x.shape):
        xp = x.copy()
        xp[i] += eps
        xm = x.copy()
        xm[i] -= eps
        g[i] = (f(xp) - f(xm)) / (2 * eps)
    return g


def rel_err(a, b):
    """Relative error between two gradient arrays, guarded near zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = max(np.linalg.norm(a.ravel()), np.linalg.norm(b.ravel()), 1e-12)
    return np.linalg.norm((a - b).ravel()) / denom
