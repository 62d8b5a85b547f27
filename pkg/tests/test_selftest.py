import math

import pytest

from mobitrace.selftest import (
    PropertyResult,
    SelftestReport,
    angle_gap,
    rel_err,
    run_selftest,
)


def by_name(report):
    return {r.name: r for r in report.results}


def test_rel_err_symmetric_and_zero_safe():
    assert rel_err(0.0, 0.0) == 0.0
    assert rel_err(1.0, 1.0) == 0.0
    assert rel_err(2.0, 1.0) == rel_err(1.0, 2.0) == 0.5
    assert rel_err(0.0, 5.0) == 1.0


def test_angle_gap_wraps_mod_pi():
    assert angle_gap(0.0, math.pi) == pytest.approx(0.0, abs=1e-15)
    assert angle_gap(0.1, math.pi - 0.1) == pytest.approx(0.2, abs=1e-12)
    assert angle_gap(1.0, 1.0) == 0.0


def test_fresh_build_passes_small_corpus():
    report = run_selftest(n_trajectories=120, master_seed=7)
    assert report.ok
    results = by_name(report)
    assert set(results) == {
        "trace-identity",
        "axis-decomposition",
        "angle-closed-form",
        "oracle-agreement",
    }
    for r in results.values():
        assert r.passed
        assert r.worst <= 1e-9
        assert r.checked > 0


def test_tampered_rg_trips_trace_identity():
    report = run_selftest(n_trajectories=120, master_seed=7, tamper_rg=1.01)
    assert not report.ok
    results = by_name(report)
    assert not results["trace-identity"].passed
    # a 1% rg inflation is a 2% trace mismatch
    assert results["trace-identity"].worst == pytest.approx(0.02, rel=0.05)
    # the angle route never consumes rg, so it must stay clean
    assert results["angle-closed-form"].passed


def test_tamper_direction_does_not_matter():
    report = run_selftest(n_trajectories=60, master_seed=7, tamper_rg=0.99)
    assert not by_name(report)["trace-identity"].passed


def test_reports_are_deterministic():
    a = run_selftest(n_trajectories=100, master_seed=3)
    b = run_selftest(n_trajectories=100, master_seed=3)
    assert a == b
    assert a.format() == b.format()


def test_report_format_shape():
    report = run_selftest(n_trajectories=50, master_seed=5)
    lines = report.format().splitlines()
    assert len(lines) == 5
    assert all(line.startswith("property ") for line in lines[:4])
    assert all(" PASS " in line for line in lines[:4])
    assert lines[-1] == "selftest: 4/4 properties passed"


def test_report_format_marks_failures():
    report = run_selftest(n_trajectories=50, master_seed=5, tamper_rg=1.01)
    text = report.format()
    assert " FAIL " in text
    assert text.splitlines()[-1].startswith("selftest: ")
    assert not text.splitlines()[-1].startswith("selftest: 4/4")


def test_result_rows_carry_failure_context():
    report = run_selftest(n_trajectories=50, master_seed=5, tamper_rg=1.01)
    failed = [r for r in report.results if not r.passed]
    assert failed
    assert all(r.detail for r in failed)


def test_report_ok_is_conjunction():
    good = PropertyResult("p", True, 0.0, 1)
    bad = PropertyResult("q", False, 1.0, 1)
    assert SelftestReport((good, good)).ok
    assert not SelftestReport((good, bad)).ok
