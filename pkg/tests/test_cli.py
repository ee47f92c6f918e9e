import csv

import pytest

from fogweave.cli import bundled_config, main
from fogweave.config import load_scenario
from fogweave.milp import parse_lp

TINY = str(bundled_config("tiny"))


def test_solve_with_oracle(capsys):
    assert main(["solve", TINY, "--oracle"]) == 0
    out = capsys.readouterr().out
    assert "status: optimal" in out
    assert "(match)" in out


def test_solve_writes_result_and_placement(tmp_path):
    out = tmp_path / "res.txt"
    assert main(["solve", TINY, "--out", str(out)]) == 0
    assert out.read_text().startswith("status: optimal\n")
    with open(tmp_path / "res.placement.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["request_id", "vnf_type", "instance", "node_id", "tier"]
    assert len(rows) == 6


def test_solve_is_byte_identical(tmp_path):
    a, b, c = tmp_path / "a.txt", tmp_path / "b.txt", tmp_path / "c.txt"
    assert main(["solve", TINY, "--out", str(a)]) == 0
    assert main(["solve", TINY, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.placement.csv").read_bytes() == (tmp_path / "b.placement.csv").read_bytes()
    # parallel subtrees explore a different number of nodes; the answer is the same
    assert main(["solve", TINY, "--out", str(c), "--workers", "2"]) == 0
    strip = lambda p: [l for l in p.read_text().splitlines() if not l.startswith("nodes_explored")]
    assert strip(a) == strip(c)
    assert (tmp_path / "a.placement.csv").read_bytes() == (tmp_path / "c.placement.csv").read_bytes()


def test_alpha_out_of_range_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["solve", TINY, "--alpha", "1.5"])
    assert exc.value.code == 2
    assert "alpha must lie in [0, 1]" in capsys.readouterr().err


def test_invalid_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(bundled_config("tiny").read_text().replace("tier: fog,", "tier: edge,", 1))
    assert main(["solve", str(bad)]) == 2
    err = capsys.readouterr().err
    assert err.startswith(f"{bad}:10:")
    assert main(["validate", str(bad)]) == 2


def test_infeasible_exits_3(capsys):
    # the two requests need 7 vCPU and the fog tier offers 6
    assert main(["solve", TINY, "--tier", "fog"]) == 3
    assert "status: infeasible" in capsys.readouterr().out


def test_budget_exhaustion_exits_1():
    assert main(["solve", TINY, "--budget", "2"]) == 1


def test_export_lp(tmp_path):
    path = tmp_path / "m.lp"
    assert main(["solve", TINY, "--export-lp", str(path)]) == 0
    model = parse_lp(path.read_text())
    assert model.alpha == 0.5 and len(model.variables) > 0


def test_validate_and_bundled_alias(capsys):
    assert main(["validate", "bundled:driving"]) == 0
    assert capsys.readouterr().out.startswith("ok: 5 nodes, 35 links, 18 VNF types, 1 requests")


def test_export_scenario_round_trip(tmp_path):
    path = tmp_path / "s.yaml"
    assert main(["export-scenario", "--seed", "2", "--apps", "app1,app2", "--out", str(path)]) == 0
    scn = load_scenario(path)
    assert [r.request_id for r in scn.requests] == ["app1", "app2"]


def test_mc_insufficient_samples_flagged(tmp_path, capsys):
    out = tmp_path / "mc.csv"
    assert main(["mc", TINY, "--samples", "10", "--out", str(out)]) == 0
    assert "insufficient samples" in capsys.readouterr().err
    rows = list(csv.DictReader(open(out)))
    assert {r["outcome"] for r in rows} == {"SKIP"}


def test_mc_passes_with_enough_samples(tmp_path):
    out = tmp_path / "mc.csv"
    assert main(["mc", TINY, "--samples", "5000", "--seed", "3", "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert {r["outcome"] for r in rows} == {"PASS"}
    # r1 has no selection or loop, so its estimates carry no noise
    assert all(float(r["stderr"]) == 0.0 for r in rows if r["request_id"] == "r1")


def test_protocol_trials_zero_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["paper", "--trials", "0"])
    assert exc.value.code == 2


def test_protocol_output_identical_across_runs(tmp_path, capsys):
    args = ["paper", "--seed", "1", "--alpha-grid", "0,0.5,1", "--trials", "2"]
    assert main(args + ["--outdir", str(tmp_path / "a")]) == 0
    assert main(args + ["--outdir", str(tmp_path / "b")]) == 0
    names = ["tier_comparison.csv", "sharing.csv", "alpha_sweep.csv", "random_baseline.csv",
             "summary.txt"]
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes(), n
    assert (tmp_path / "a" / "summary.txt").read_text().endswith("overall PASS\n")
