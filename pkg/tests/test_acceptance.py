"""One pass/fail line per acceptance criterion, with pinned tolerances.

Run with ``pytest tests/test_acceptance.py -s`` to see the report lines.
"""

import pytest

from hele_shaw.acceptance import CRITERIA


@pytest.mark.slow
@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k):
    checks = CRITERIA[k]()
    assert checks
    graded = [c for c in checks if not c.info]
    verdict = "PASS" if all(c.passed for c in graded) else "FAIL"
    print(f"\ncriterion {k}: {verdict}")
    for c in checks:
        print("  " + c.line())
    failed = [c.line() for c in graded if not c.passed]
    assert not failed, "\n".join(failed)
