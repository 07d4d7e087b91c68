"""Acceptance gate: every criterion at its stated tolerance, one line each."""

import pytest

from bergpoly import acceptance

RESULTS = {}


@pytest.mark.acceptance
@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA),
                         ids=[f"C{k:02d}" for k in sorted(acceptance.CRITERIA)])
def test_criterion(number):
    (result,) = acceptance.run([number])
    RESULTS[number] = result
    print(result.line())
    assert result.passed, result.line()
