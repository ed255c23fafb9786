import json

import numpy as np
import pytest

from coordlab import harness as Hn
from coordlab import prob as P
from coordlab.presets import binary_example, identity
from coordlab.region import target_to_dict, witness_to_dict


def small(**kw):
    d = {"preset": "binary_example", "scheme": "hybrid", "n_values": [50], "trials_per_n": 2,
         "epsilon_policy": [0.15, 0.12], "subblock": 50, "rule": "best", "master_seed": 1}
    d.update(kw)
    return d


# ------------------------------------------------------------------ config

def test_missing_trials_per_n_is_reported():
    d = small()
    del d["trials_per_n"]
    with pytest.raises(Hn.ConfigError) as e:
        Hn.parse_config(d)
    assert e.value.problems == ["trials_per_n: required"]


def test_all_problems_listed_at_once():
    d = small(trials_per_n=0, colour="blue", n_values=[50, 75], rule="worst")
    with pytest.raises(Hn.ConfigError) as e:
        Hn.parse_config(d)
    p = e.value.problems
    assert any(s.startswith("unknown keys ['colour']") for s in p)
    assert "trials_per_n: must be a positive integer" in p
    assert "subblock: 50 does not divide n=75" in p
    assert "rule: 'first' or 'best'" in p


@pytest.mark.parametrize("patch,msg", [
    ({"scheme": "telepathy"}, "scheme: must be one of"),
    ({"master_seed": -1}, "master_seed"),
    ({"master_seed": True}, "master_seed"),
    ({"n_values": []}, "n_values"),
    ({"n_values": [50, 50]}, "duplicates"),
    ({"B": 3}, "B: only valid"),
    ({"epsilon_policy": [0.1]}, "epsilon_policy"),
    ({"epsilon_policy": 2.0}, "epsilon_policy"),
    ({"margins": -0.1}, "margins"),
    ({"search": {"region": "noncausal"}}, "search.region"),
    ({"search": {"starts": 0}}, "search.starts"),
    ({"binning": "random"}, "binning/rates"),
    ({"tv_threshold": "high"}, "tv_threshold"),
    ({"problem": {"source": {}, "channel": {}}}, "exactly one of 'preset' and 'problem'"),
])
def test_config_rejections(patch, msg):
    with pytest.raises(Hn.ConfigError, match=msg):
        Hn.parse_config(small(**patch))


def test_blockmarkov_requires_b():
    d = small(scheme="blockmarkov_strict", preset="lossless_state", epsilon_policy="schedule")
    with pytest.raises(Hn.ConfigError, match="B: required"):
        Hn.parse_config(d)
    cfg = Hn.parse_config({**d, "B": 3})
    assert cfg.B == 3 and cfg.binning == "auto"


def test_region_check_config():
    cfg = Hn.parse_config({"preset": "binary_example", "scheme": "region_check", "master_seed": 0,
                           "search": {"region": "noncausal", "card_u": 2}})
    assert cfg.n_values == () and cfg.trials_per_n == 1
    with pytest.raises(Hn.ConfigError, match="search.region: required"):
        Hn.parse_config({"preset": "binary_example", "scheme": "region_check", "master_seed": 0})


def test_load_config_reports_json_position(tmp_path):
    f = tmp_path / "c.json"
    f.write_text('{"scheme": "hybrid",\n  "n_values": [1,]\n}')
    with pytest.raises(Hn.ConfigError, match="line 2, column"):
        Hn.load_config(f)
    with pytest.raises(Hn.ConfigError, match="cannot read"):
        Hn.load_config(tmp_path / "missing.json")


def test_config_roundtrip():
    cfg = Hn.parse_config(small())
    again = Hn.parse_config(json.loads(json.dumps(Hn.config_to_dict(cfg))))
    assert Hn.config_to_dict(again) == Hn.config_to_dict(cfg)


def test_shipped_configs_parse():
    from pathlib import Path
    configs = sorted(Path(__file__).resolve().parents[1].joinpath("scripts", "configs").glob("*.json"))
    assert len(configs) >= 6
    for f in configs:
        Hn.load_config(f)


# ------------------------------------------------------------------- seeds

def test_derive_seed_frozen():
    assert Hn.derive_seed(1, "hybrid", 100, 0) == 4703891405678020867
    assert Hn.derive_seed(20240611, "hybrid", "sub50", "codebook") == 7882603206581823864
    assert Hn.derive_seed(0, "region_check", 0, "search") == 10522889474835784627
    assert Hn.derive_seed(1, "hybrid", 100, 1) != Hn.derive_seed(1, "hybrid", 100, 0)


# ----------------------------------------------------------------- running

def test_one_row_run():
    t = Hn.run_experiment(Hn.parse_config(small(trials_per_n=1)))
    assert len(t.rows) == 1
    r = t.rows[0]
    assert r["status"] == "ok" and r["n"] == 50 and r["trial"] == 0
    assert r["seed"] == Hn.derive_seed(1, "hybrid", 50, 0)
    assert r["slack"] == pytest.approx(0.230060, abs=1e-6)
    assert t.aggregates[0]["trials"] == 1


def test_determinism_and_threads():
    cfg = Hn.parse_config(small(n_values=[50, 100], trials_per_n=6))
    a = Hn.results_csv(Hn.run_experiment(cfg, threads=1))
    b = Hn.results_csv(Hn.run_experiment(cfg, threads=4))
    assert a == b
    c = Hn.results_csv(Hn.run_experiment(cfg, master_seed=2))
    assert c != a


def test_aggregates_recompute():
    t = Hn.run_experiment(Hn.parse_config(small(n_values=[50, 100], trials_per_n=5)))
    assert Hn.check_aggregates(t)
    for a in t.aggregates:
        tv = np.array(t.column("tv", a["n"]))
        assert a["median_tv"] == pytest.approx(np.median(tv))
        assert a["failure_rate"] == pytest.approx(np.mean(tv > t.tv_threshold))


def test_aggregate_handles_errors_and_empty():
    rows = [{"n": 10, "status": "error", "tv": None}, {"n": 10, "status": "ok", "tv": 0.3},
            {"n": 10, "status": "ok", "tv": 0.05}]
    a = Hn.aggregate(rows, (10, 20), 0.1)
    assert a[0] == {"n": 10, "trials": 3, "errors": 1, "median_tv": pytest.approx(0.175),
                    "mean_tv": pytest.approx(0.175), "failure_rate": 0.5}
    assert a[1] == {"n": 20, "trials": 0, "errors": 0, "median_tv": None, "mean_tv": None, "failure_rate": None}


def test_empty_table_gives_header_only_csv():
    t = Hn.ResultsTable("hybrid", (), 0.1, [], [])
    assert Hn.results_csv(t) == ",".join(Hn.COLUMNS) + "\n"
    assert Hn.read_results_csv(Hn.results_csv(t)) == []


def test_csv_roundtrip_and_json():
    t = Hn.run_experiment(Hn.parse_config(small(trials_per_n=3)))
    text = Hn.results_csv(t)
    assert text.splitlines()[0] == ",".join(Hn.COLUMNS)
    assert "seconds" not in text
    assert Hn.read_results_csv(text) == t.rows
    doc = json.loads(Hn.results_json(t))
    assert doc["columns"] == list(Hn.COLUMNS) and len(doc["rows"]) == 3


def test_plotdata_has_one_point_per_n(tmp_path):
    t = Hn.run_experiment(Hn.parse_config(small(n_values=[50, 100, 150], trials_per_n=2)))
    f = tmp_path / "plot.csv"
    text = Hn.emit_plotdata(t, f)
    lines = f.read_text().splitlines()
    assert text == f.read_text()
    assert lines[0] == "n,median_tv,mean_tv,failure_rate,trials,errors"
    assert [int(s.split(",")[0]) for s in lines[1:]] == [50, 100, 150]


def test_emit_results_errors(tmp_path):
    t = Hn.ResultsTable("hybrid", (), 0.1, [], [])
    with pytest.raises(ValueError, match="format"):
        Hn.emit_results(t, "xml")
    with pytest.raises(Hn.HarnessError, match="cannot write"):
        Hn.emit_results(t, "csv", tmp_path / "no" / "such" / "dir.csv")


def test_identity_failure_rate_vanishes():
    cfg = Hn.parse_config({"preset": "identity", "scheme": "hybrid", "n_values": [10, 100, 1000],
                           "trials_per_n": 50, "master_seed": 4, "tv_threshold": 0.1})
    t = Hn.run_experiment(cfg)
    fr = [a["failure_rate"] for a in t.aggregates]
    assert fr[0] > fr[1] >= fr[2] and fr[2] == 0.0
    assert all(r["index_correct"] for r in t.rows)


def test_build_error_becomes_error_rows():
    # a margin larger than half the slack cannot be honoured
    t = Hn.run_experiment(Hn.parse_config(small(margins=0.2, trials_per_n=3)))
    assert [r["status"] for r in t.rows] == ["error"] * 3
    assert "CodeDesignError" in t.rows[0]["error"]
    assert t.aggregates[0]["errors"] == 3 and t.aggregates[0]["median_tv"] is None


def test_unknown_preset_parameter_is_config_error():
    with pytest.raises(Hn.ConfigError, match="preset binary_example"):
        Hn.run_experiment(Hn.parse_config(small(preset={"name": "binary_example", "q": 1})))


def test_supplied_witness_must_certify():
    pr = binary_example()
    bad = binary_example(p=0.3, eps=0.1, d=0.2).witnesses["noncausal"]
    cfg = Hn.parse_config(small(witness=witness_to_dict(bad)))
    with pytest.raises(Hn.NoWitness, match="certificate"):
        Hn.run_experiment(cfg)
    ok = Hn.parse_config(small(witness=witness_to_dict(pr.witnesses["noncausal"]), trials_per_n=1))
    assert Hn.run_experiment(ok).rows[0]["status"] == "ok"


def test_explicit_problem_and_target():
    pr = identity()
    d = {"problem": {"source": P.to_dict(pr.target.source), "channel": P.to_dict(pr.target.channel)},
         "target": target_to_dict(pr.target), "scheme": "hybrid", "n_values": [20], "trials_per_n": 2,
         "master_seed": 0, "search": {"card_u": 1}}
    t = Hn.run_experiment(Hn.parse_config(d))
    assert all(r["status"] == "ok" for r in t.rows)


def test_region_check_rows():
    cfg = Hn.parse_config({"preset": "binary_example", "scheme": "region_check", "master_seed": 0,
                           "trials_per_n": 2, "search": {"region": "noncausal", "card_u": 2, "starts": 8}})
    t = Hn.run_experiment(cfg)
    assert [r["status"] for r in t.rows] == ["member_with_witness"] * 2
    assert all(r["slack"] > 0.2 for r in t.rows)


def test_blockmarkov_rows():
    cfg = Hn.parse_config({"preset": "lossless_state", "scheme": "blockmarkov_strict", "n_values": [50],
                           "trials_per_n": 3, "B": 3, "subblock": 25, "binning": "singleton", "master_seed": 7})
    t = Hn.run_experiment(cfg)
    r = t.rows[0]
    assert r["status"] == "ok" and r["subblocks"] == 4 and r["exact"]
    assert 0 <= r["subblocks_ok"] <= 4
