import json

import pytest

from normclust.cli import main
from normclust.harness import BenchSpec, SolveConfig, markdown_table, result_json, run_bench, solve, summarize, verify_result
from normclust.metric import Instance, generate_instance


@pytest.fixture
def inst_file(tmp_path):
    path = tmp_path / "inst.json"
    rc = main(["gen", "--kind", "euclidean", "--facilities", "5", "--clients", "8", "--k", "2",
               "--capacity", "4", "--norm", "topl:2", "--seed", "3", "--out", str(path)])
    assert rc == 0
    return path


def _solve(inst_file, tmp_path, *extra):
    out = tmp_path / "res.json"
    rc = main(["solve", "--in", str(inst_file), "--out", str(out), *extra])
    return rc, json.loads(out.read_text()), out


def _verify(inst_file, res, tmp_path, capsys):
    path = tmp_path / "tampered.json"
    path.write_text(json.dumps(res))
    capsys.readouterr()
    rc = main(["verify", "--instance", str(inst_file), "--in", str(path)])
    return rc, json.loads(capsys.readouterr().out)


def test_gen_is_deterministic(tmp_path, inst_file):
    other = tmp_path / "again.json"
    main(["gen", "--facilities", "5", "--clients", "8", "--k", "2", "--capacity", "4",
          "--norm", "topl:2", "--seed", "3", "--out", str(other)])
    assert other.read_text() == inst_file.read_text()


def test_solve_verify_roundtrip(inst_file, tmp_path, capsys):
    rc, res, out = _solve(inst_file, tmp_path, "--alg", "mnckc")
    assert rc == 0
    assert set(res) == {"instance", "open", "assignment", "norm", "value", "meta"}
    rc, report = _verify(inst_file, res, tmp_path, capsys)
    assert rc == 0 and report == {"ok": True, "problems": []}


def test_exact_matches_oracle(inst_file, tmp_path):
    rc, res, _ = _solve(inst_file, tmp_path, "--alg", "exact")
    assert rc == 0
    assert res["value"] == res["meta"]["opt_value"]


def test_capacity_breach_is_named(inst_file, tmp_path, capsys):
    _, res, _ = _solve(inst_file, tmp_path, "--alg", "exact")
    f = res["open"][0]
    res["assignment"] = {j: f for j in res["assignment"]}
    rc, report = _verify(inst_file, res, tmp_path, capsys)
    assert rc != 0
    assert any(f"facility {f} serves 8 clients, capacity 4" in p for p in report["problems"])


def test_value_mismatch_reported(inst_file, tmp_path, capsys):
    _, res, _ = _solve(inst_file, tmp_path, "--alg", "exact")
    res["value"] = str(int(res["value"]) + 1) if "/" not in res["value"] else "0"
    rc, report = _verify(inst_file, res, tmp_path, capsys)
    assert rc == 2
    assert any(p.startswith("value mismatch") for p in report["problems"])


def test_closed_facility_reported(inst_file, tmp_path, capsys):
    _, res, _ = _solve(inst_file, tmp_path, "--alg", "exact")
    closed = next(f for f in range(5) if f not in res["open"])
    res["assignment"]["0"] = closed
    rc, report = _verify(inst_file, res, tmp_path, capsys)
    assert rc == 2
    assert any(f"closed facility {closed}" in p for p in report["problems"])


def test_assign_subcommand(inst_file, tmp_path):
    out = tmp_path / "a.json"
    rc = main(["assign", "--open", "0,2", "--in", str(inst_file), "--out", str(out), "--eps", "1/4"])
    res = json.loads(out.read_text())
    assert rc == 0 and res["open"] == [0, 2]
    assert set(res["assignment"].values()) <= {0, 2}


def test_usage_errors_exit_64(inst_file, tmp_path, capsys):
    assert main(["solve", "--alg", "topcn", "--in", str(inst_file)]) == 64
    assert main(["solve", "--alg", "exact", "--in", str(tmp_path / "missing.json")]) == 64
    assert "error:" in capsys.readouterr().err


def test_props_exit_code(capsys):
    assert main(["props", "--trials", "20", "--suite", "oplus", "--suite", "mix"]) == 0
    out = capsys.readouterr().out
    assert "violations=0" in out
    assert main(["props", "--suite", "nope"]) == 64


def test_bench_table_and_csv(tmp_path, capsys):
    csv = tmp_path / "b.csv"
    rc = main(["bench", "--alg", "mnckc", "--facilities", "4", "--clients", "5", "--k", "2",
               "--capacity", "3", "--norm", "linf", "--seeds", "3", "--workers", "1", "--csv", str(csv)])
    assert rc == 0
    table = capsys.readouterr().out
    assert "max ratio" in table.lower()
    lines = csv.read_text().strip().splitlines()
    assert len(lines) == 4


def test_bench_results_identical_across_workers(tmp_path):
    paths = []
    for w in (1, 2):
        p = tmp_path / f"r{w}.jsonl"
        main(["bench", "--alg", "topcn", "--facilities", "4", "--clients", "5", "--k", "2", "--c", "3/4",
              "--seeds", "3", "--no-oracle", "--workers", str(w), "--results", str(p)])
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_harness_solve_and_summary():
    inst = generate_instance("euclidean", {"n_facilities": 4, "n_clients": 5, "k": 2, "capacity": 3, "norm": "linf"}, seed=1)
    cfg = SolveConfig("mnckc")
    res = result_json(inst, solve(inst, cfg), cfg)
    assert verify_result(inst, res) == []
    assert Instance.from_json(inst.to_json()).digest() == res["instance"]
    rows = run_bench(BenchSpec("euclidean", {"n_facilities": 4, "n_clients": 5, "k": 2, "capacity": 3, "norm": "linf"}, cfg, range(2), True), workers=1)
    s = summarize([r for r, _ in rows])
    assert s["runs"] == 2 and s["unverified"] == 0 and s["max_ratio"] <= 3
    assert "|" in markdown_table([r for r, _ in rows])
