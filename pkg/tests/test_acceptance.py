"""The primary acceptance criteria at their stated tolerances, one pass/fail line each."""

import os

import pytest

from degmag import verify

PRIMARY = [c for c in verify.CRITERIA if c.tag == "PRIMARY"]
WORKERS = min(4, os.cpu_count() or 1)


@pytest.mark.slow
@pytest.mark.parametrize("criterion", PRIMARY, ids=[c.id for c in PRIMARY])
def test_primary_criterion(criterion, capsys):
    r = verify.run_criterion(criterion, WORKERS)
    with capsys.disabled():
        print("\n" + verify.format_line(r) + f"  [{r.runtime:.1f}s]")
        for k, v in r.metrics.items():
            print(f"       {k} = {v}")
    assert r.passed, r.detail


def test_all_primary_criteria_registered():
    assert [c.id for c in PRIMARY] == [f"C{i}" for i in range(1, 12)]


@pytest.mark.slow
def test_full_verify_is_byte_identical_across_worker_counts(tmp_path, capsys):
    from degmag import cli, io

    bodies = []
    for w in (1, 2):
        out = tmp_path / f"w{w}"
        with capsys.disabled():
            print(f"\n  full verify run, workers={w}")
            code = cli.main(["verify", "--out", str(out), "--workers", str(w)])
        assert code == 0
        header, rows = io.read_csv(out / "verify.csv")
        bodies.append((out / "verify.csv").read_bytes())
        assert {r[4] for r in rows} == {f"C{i}" for i in range(1, 12)}
    with capsys.disabled():
        print(f"  C11 full-run {'PASS' if bodies[0] == bodies[1] else 'FAIL'}  verify CSV identical across workers")
    assert bodies[0] == bodies[1]
