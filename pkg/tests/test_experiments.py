import csv

import pytest

from fogweave.evaluation import check_feasibility
from fogweave.experiments import (
    ALPHA_COLUMNS,
    CSV_NAMES,
    RANDOM_COLUMNS,
    SHARING_COLUMNS,
    TIER_COLUMNS,
    ExperimentReport,
    Section,
    run_alpha_sweep,
    run_random_comparison,
    run_sharing_comparison,
    run_tier_comparison,
    trial_seed,
    unshare,
    write_report,
)
from fogweave.infra_model import SHARED_TYPE, generate_scenario


@pytest.fixture(scope="module")
def tiers():
    return run_tier_comparison(1)


@pytest.fixture(scope="module")
def sweep():
    return run_alpha_sweep(1, [0.0, 0.5, 1.0])


def test_tier_comparison_rows_and_checks(tiers):
    assert len(tiers.rows) == 9
    assert {r["configuration"] for r in tiers.rows} == {"cloud", "fog", "hybrid"}
    assert tiers.passed, [a.line() for a in tiers.assertions if not a.passed]
    for r in tiers.rows:
        if r["configuration"] == "cloud":
            assert r["fog_vcpu"] == 0
        if r["configuration"] == "fog":
            assert r["cloud_vcpu"] == 0


def test_six_vnf_cloud_cost_window(tiers):
    for app in ("app1", "app2"):
        c = tiers.results[(app, "cloud")].cost_total
        # six licenses, at most 4 vCPU each at 0.1, plus small traffic terms
        assert 600 <= c <= 606


def test_unshare_clones_type():
    infra, reqs = generate_scenario(1)
    infra2, reqs2 = unshare(infra, reqs[:2])
    assert f"{SHARED_TYPE}.app2" in infra2.types
    assert SHARED_TYPE in reqs2[0].vnf_types
    assert SHARED_TYPE not in reqs2[1].vnf_types
    assert infra2.vnf_type(f"{SHARED_TYPE}.app2").requirement_vcpu == \
        infra.vnf_type(SHARED_TYPE).requirement_vcpu


def test_sharing_rows():
    sec = run_sharing_comparison(1)
    modes = [r["mode"] for r in sec.rows]
    assert modes == ["sharing", "non_sharing"]
    s, n = sec.results["sharing"], sec.results["non_sharing"]
    assert s.objective <= n.objective + 1e-9
    assert sec.rows[1]["shared_instances"] == 1


def test_alpha_sweep(sweep):
    assert [r["alpha"] for r in sweep.rows] == [0.0, 0.5, 1.0]
    for r in sweep.rows:
        assert r["fog_share"] + r["cloud_share"] == pytest.approx(1.0)
    assert sweep.rows[-1]["cloud_share"] == 1.0
    gating = [a for a in sweep.assertions if not a.advisory]
    assert all(a.passed for a in gating), [a.line() for a in gating if not a.passed]


def test_alpha_grid_validated():
    with pytest.raises(ValueError):
        run_alpha_sweep(1, [0.5, 1.5])


def test_random_comparison_reproducible():
    a = run_random_comparison(1, trials=3)
    b = run_random_comparison(1, trials=3)
    assert a.rows == b.rows
    assert len(a.rows) == 9
    assert a.passed
    infra, reqs = generate_scenario(1)
    for r in a.rows:
        assert r["objective"] >= r["optimal_objective"] - 1e-9
        assert r["trial_seed"] == trial_seed(1, int(r["app"][-1]) - 1, r["trial"])
    res = a.results[("app3", 0)]
    assert not check_feasibility(res.placement, [reqs[2]], infra)
    with pytest.raises(ValueError):
        run_random_comparison(1, trials=0)


def test_trial_seeds_distinct():
    seeds = {trial_seed(1, a, t) for a in range(3) for t in range(30)}
    assert len(seeds) == 90


def test_report_files(tmp_path, tiers, sweep):
    report = ExperimentReport(1, 0.5, [tiers, sweep])
    written = write_report(report, tmp_path)
    assert [p.name for p in written] == ["tier_comparison.csv", "alpha_sweep.csv", "summary.txt"]
    with open(tmp_path / CSV_NAMES["tier_comparison"]) as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == TIER_COLUMNS
    summary = (tmp_path / "summary.txt").read_text().splitlines()
    assert summary[0] == "seed 1 alpha 0.5"
    assert summary[-1] in ("overall PASS", "overall FAIL")
    assert all(l.startswith(("PASS", "FAIL")) for l in summary[1:-1])


def test_advisory_checks_do_not_gate():
    s = Section("x", ())
    s.check("soft", False, advisory=True)
    s.check("hard", True)
    assert s.passed
    assert s.assertions[0].line() == "FAIL [advisory] x: soft"
    s.check("hard2", False)
    assert not s.passed


def test_column_sets_are_distinct_and_flat():
    for cols in (TIER_COLUMNS, SHARING_COLUMNS, ALPHA_COLUMNS, RANDOM_COLUMNS):
        assert len(set(cols)) == len(cols)
        assert cols[0] == "seed"
