import numpy as np
import pytest

from dqnfraud.environment import Transactions

ACCEPTANCE_RESULTS = []


def make_transactions(labels, amounts=None, features=None):
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[0]
    if features is None:
        features = np.arange(n, dtype=np.float64)[:, None] / max(n, 1)
    if amounts is None:
        amounts = np.full(n, 10.0)
    return Transactions(features, amounts, labels)


@pytest.fixture
def criterion():
    """Record an acceptance criterion outcome for the end-of-run summary."""

    def record(number, passed, detail):
        ACCEPTANCE_RESULTS.append((number, bool(passed), detail))
        line = f"[criterion {number}] {'PASS' if passed else 'FAIL'} {detail}"
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: str(r[0])):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
