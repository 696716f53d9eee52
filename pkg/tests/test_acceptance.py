"""Acceptance criteria on the default profile.

One module-scoped run of the full validation suite backs every criterion.
Each test records a PASS/FAIL line that is printed in the terminal summary.
"""

from __future__ import annotations

import logging
import time

import pytest

from conftest import ACCEPTANCE_LINES
from ftdist.harness import DEFAULT_PROFILE, determinism_check, euler_suite, tz_suite, validate_suite

pytestmark = pytest.mark.slow
log = logging.getLogger(__name__)

SWEEP_LIMIT_SECONDS = 30 * 60
TZ_LIMIT_SECONDS = 5 * 60


@pytest.fixture(scope="module")
def suite():
    t0 = time.perf_counter()
    report = validate_suite(DEFAULT_PROFILE)
    report["seconds"] = time.perf_counter() - t0
    return report


def record(number: int, name: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if passed else 'FAIL'} {name} ({detail})")
    assert passed, f"criterion {number} ({name}) failed: {detail}"


def test_profile_matches_desk_scale():
    p = DEFAULT_PROFILE
    assert (p.graphs, p.n_max, p.m_max, p.max_length, p.f) == (200, 12, 20, 8, 2)
    assert (p.s_nc, p.s_ed, p.d, p.ks) == (2, 100, 2, (1, 2, 3))
    assert p.stretch == 20000


def test_criterion_1_soundness_and_stretch(suite):
    checks = suite["checks"]
    passed = (
        suite["instances"] == 200
        and checks["no_errors"]
        and checks["reachability"]
        and checks["sandwich_literal"]
        and checks["upper_bound"]
        and suite["seconds"] < SWEEP_LIMIT_SECONDS
    )
    detail = (
        f"{suite['queries']} queries, {suite['exact_estimates']} exact, max ratio {suite['max_ratio']}, "
        f"{suite['seconds']:.0f}s, errors {suite['errors'][:3]}, failures {suite['sample_failures'][:3]}"
    )
    record(1, "soundness and stretch sweep", passed, detail)


def test_criterion_2_lower_bound(suite):
    record(2, "lower bound", suite["checks"]["lower_bound"], f"{suite['queries']} queries")


def test_criterion_3_euler_tours(suite):
    rep = suite["suites"]["euler_tours"]
    fresh = euler_suite(DEFAULT_PROFILE.euler_instances, DEFAULT_PROFILE.euler_n_max, DEFAULT_PROFILE.seed)
    passed = rep["instances"] == 1000 and rep["passed"] and fresh == rep
    detail = f"{rep['instances']} instances, {rep['coverage_checked']} coverage checks"
    record(3, "Euler-tour recovery", passed, detail)


def test_criterion_4_hierarchy(suite):
    record(4, "hierarchy validation", suite["checks"]["hierarchy"], f"{suite['instances']} label builds")


def test_criterion_5_hitting_sets(suite):
    checks = suite["checks"]
    passed = checks["hitting_sets"] and checks["tail_dp"]
    dp = suite["suites"]["tail_dp"]
    detail = f"dp systems {dp['systems']}, mismatches {dp['mismatches']}"
    record(5, "hitting sets", passed, detail)


def test_criterion_6_tz_stretch(suite):
    t0 = time.perf_counter()
    rep = tz_suite(DEFAULT_PROFILE.tz_graphs, DEFAULT_PROFILE.tz_n_max, (1, 2, 3), DEFAULT_PROFILE.seed)
    seconds = time.perf_counter() - t0
    passed = rep["passed"] and suite["checks"]["tz_stretch"] and seconds < TZ_LIMIT_SECONDS
    detail = f"{rep['queries']} queries, max ratio {rep['max_ratio']:.3f}, {seconds:.1f}s"
    record(6, "TZ stretch", passed, detail)


def test_criterion_7_fast_query(suite):
    detail = f"{suite['fast_queries']} queries, max ratio {suite['fast_max_ratio']:.3f}"
    record(7, "fast-query sandwich", suite["checks"]["fast_query"] and suite["fast_queries"] > 0, detail)


def test_criterion_8_pack_unpack(suite):
    passed = suite["checks"]["pack_unpack"] and suite["pack_samples"] == 50
    record(8, "pack/unpack equivalence", passed, f"{suite['pack_samples']} samples")


def test_criterion_9_diagnostics(suite):
    diag = suite["diagnostics"]
    for key, value in sorted(diag.items()):
        log.info("diagnostic %s = %s", key, value)
    passed = suite["checks"]["nontrivial_bound"] and suite["checks"]["potential_monotone"]
    detail = (
        f"non-trivial {diag['nontrivial_edge_labels']} <= {diag['nontrivial_bound']}, "
        f"cut ratio max {diag['cut_ratio_max']:.3f}, label bytes max {diag['edge_label_bytes_max']}"
    )
    record(9, "diagnostics", passed, detail)


def test_criterion_10_determinism(suite):
    reports = [suite["suites"]["determinism"]] + [determinism_check(DEFAULT_PROFILE, seed) for seed in (1, 5, 9)]
    passed = all(r["passed"] for r in reports)
    record(10, "determinism", passed, f"{len(reports)} seeds byte-identical")


def test_suite_passes_overall(suite):
    assert suite["passed"], {k: v for k, v in suite["checks"].items() if not v}
