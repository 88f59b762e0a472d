"""The ten acceptance criteria, one test each, at their stated tolerances."""

import pytest

from ellipsoid_rh.acceptance import CHECKS


@pytest.mark.parametrize("check", CHECKS, ids=[f"criterion_{i + 1:02d}" for i in range(len(CHECKS))])
def test_criterion(check, capsys):
    res = check()
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.details
