"""The fourteen desk acceptance criteria, one test each.

Run ``pytest tests/test_acceptance.py -v`` to see a pass/fail line per criterion.
"""

import pytest

from pshlab.acceptance import CHECKS, run_check


@pytest.mark.parametrize("cid", sorted(CHECKS))
def test_criterion(cid, capsys):
    chk = run_check(cid, seed=0, timed=False)
    with capsys.disabled():
        loc = f"  [{chk.locator}]" if chk.locator else ""
        print(f"\n{cid} {chk.name}: {chk.verdict.upper()}{loc}")
    assert chk.verdict == "pass", chk.payload.get(chk.locator, chk.payload)
