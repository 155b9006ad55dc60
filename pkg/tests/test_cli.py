import json

import pytest

from toclayout.cli import main
from toclayout.domain import grouping
from toclayout.formats import dump_json, dump_profile, parse_config
from toclayout.profiling import SynthSpec, synthesize_profile

from conftest import write_problem


def test_advise_happy_path(tmp_path, capsys):
    cfg = write_problem(tmp_path)
    assert main(["advise", cfg, "--sla", "0.25", "--preset", "all:H-SSD", "--preset", "split:H-SSD:HDD"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["status"] == "feasible"
    rec = report["recommendation"]
    assert set(rec["layout"]) == {"t0", "t0_pk", "t1", "t1_pk"}
    assert rec["psr_percent"] == 100.0
    assert set(report["presets"]) == {"all:H-SSD", "split:H-SSD:HDD"}
    assert report["presets"]["all:H-SSD"]["toc_cents"] >= rec["toc_cents"]


def test_advise_out_writes_report_and_summary(tmp_path, capsys):
    cfg = write_problem(tmp_path)
    out = tmp_path / "r.json"
    assert main(["advise", cfg, "--out", str(out)]) == 0
    assert "status: feasible" in capsys.readouterr().out
    assert json.loads(out.read_text())["engine"] == "dot"


def test_advise_deterministic(tmp_path):
    cfg = write_problem(tmp_path)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["advise", cfg, "--out", str(a)])
    main(["advise", cfg, "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_bad_sla_exit_3(tmp_path, capsys):
    cfg = write_problem(tmp_path)
    with pytest.raises(SystemExit) as e:
        main(["advise", cfg, "--sla", "1.5"])
    assert e.value.code == 3
    assert "relative SLA must be in (0,1]" in capsys.readouterr().err


def test_missing_config_exit_3(tmp_path, capsys):
    assert main(["advise", str(tmp_path / "nope.json")]) == 3
    assert "nope.json" in capsys.readouterr().err


def test_es_over_budget_exit_4(tmp_path, capsys):
    cfg = write_problem(tmp_path, n_tables=8)
    assert main(["advise", cfg, "--engine", "es"]) == 4
    assert "43,046,721" in capsys.readouterr().err


def test_infeasible_exit_2(tmp_path, capsys):
    cfg = write_problem(tmp_path, classes=("H-SSD",))
    doc = json.loads(open(cfg).read())
    doc["classes"] = [{"id": "H-SSD", "from_fixture": True, "capacity_gb": 1}]
    open(cfg, "w").write(dump_json(doc))
    assert main(["advise", cfg]) == 2
    report = json.loads(capsys.readouterr().out)
    assert report["recommendation"] is None
    assert report["infeasibility"]["baseline"]["violations"]


def test_discrete_requires_alpha(tmp_path, capsys):
    cfg = write_problem(tmp_path)
    assert main(["advise", cfg, "--cost-model", "discrete"]) == 3
    doc = json.loads(open(cfg).read())
    for c in doc["classes"]:
        c["capacity_gb"] = 50
    open(cfg, "w").write(dump_json(doc))
    capsys.readouterr()
    assert main(["advise", cfg, "--cost-model", "discrete", "--alpha", "0.5", "--both-costs"]) == 0
    costs = json.loads(capsys.readouterr().out)["recommendation"]["layout_cost_variants_cents_per_hour"]
    assert set(costs) == {"linear", "discrete"}


def test_multi_configuration(tmp_path, capsys):
    cfg = write_problem(tmp_path)
    doc = json.loads(open(cfg).read())
    doc.pop("classes")
    doc["configurations"] = [
        {"id": "box1", "classes": [{"id": c, "from_fixture": True} for c in ("HDD-RAID0", "L-SSD", "H-SSD")],
         "profile": "p1.csv"},
        {"id": "box2", "classes": [{"id": c, "from_fixture": True} for c in ("HDD", "L-SSD-RAID0", "H-SSD")],
         "profile": "p2.csv"},
    ]
    open(cfg, "w").write(dump_json(doc))
    p = parse_config(doc)
    for conf, name in zip(p.configurations, ("p1.csv", "p2.csv")):
        prof = synthesize_profile(p.objects, grouping(p.objects), conf.classes, SynthSpec("random", 1, ("q1", "q2", "q3")))
        (tmp_path / name).write_text(dump_profile(prof))
    assert main(["advise", cfg, "--sla", "0.25"]) == 0
    assert json.loads(capsys.readouterr().out)["configuration"] in {"box1", "box2"}


def test_compare_single_group(tmp_path, capsys):
    cfg = write_problem(tmp_path, n_tables=1)
    assert main(["compare", cfg, "--sla", "0.25"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["toc_ratio"] == 1.0
    assert doc["es"]["layouts_examined"] == 9


def test_compare_random_batch(tmp_path, capsys):
    assert main(["compare", "--random-batch", "5", "--sla", "0.25"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["instances"] == 5
    assert doc["toc_ratio"]["min"] >= 1.0 - 1e-12


def test_compare_needs_input(capsys):
    assert main(["compare"]) == 3


def test_bench_cli(tmp_path, capsys):
    fixture = tmp_path / "lat.json"
    rc = main(["bench", str(tmp_path), "--ops", "16", "--working-set", str(128 << 10),
               "--class-id", "tmpfs", "--price", "0.01", "--capacity", "10", "--append-to", str(fixture)])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.count("ms/IO") == 4
    doc = json.loads(fixture.read_text())
    assert set(doc["classes"][0]["latency_ms"]["1"]) == {"SR", "RR", "SW", "RW"}


def test_bench_unwritable_exit_3(tmp_path):
    assert main(["bench", str(tmp_path / "missing")]) == 3


def test_synth_deterministic(tmp_path, capsys):
    cfg = write_problem(tmp_path)
    assert main(["synth", cfg, "--scenario", "plan-switch", "--seed", "3"]) == 0
    a = capsys.readouterr().out
    assert main(["synth", cfg, "--scenario", "plan-switch", "--seed", "3"]) == 0
    assert capsys.readouterr().out == a
    assert a.startswith("query,object,io_type,placement,count\n")


def test_synth_unknown_scenario(tmp_path, capsys):
    cfg = write_problem(tmp_path)
    assert main(["synth", cfg, "--scenario", "bogus"]) == 3
    assert "unknown scenario" in capsys.readouterr().err
