import json
import subprocess
import sys

import pytest

from coordlab import prob as P
from coordlab.cli import main
from coordlab.presets import binary_example, separation_example
from coordlab.region import target_to_dict


@pytest.fixture
def sep_target(tmp_path):
    f = tmp_path / "sep.json"
    f.write_text(json.dumps(target_to_dict(separation_example().target)))
    return f


@pytest.fixture
def binary_target(tmp_path):
    f = tmp_path / "bin.json"
    assert main(["example", "binary", "--p", "0.4", "--eps", "0.1", "--d", "0.2", "--emit-target", str(f)]) == 0
    return f


def test_example_binary(capsys):
    assert main(["example", "binary", "--p", "0.4", "--eps", "0.1", "--d", "0.2"]) == 0
    out = capsys.readouterr().out
    assert "I(U;S) = 0.2490 bits" in out
    assert "I(U;Y) = 0.4791 bits" in out
    assert "slack = 0.2301 bits" in out
    assert "certificate: ok" in out


def test_example_binary_bad_parameters(capsys):
    assert main(["example", "binary", "--p", "0.5", "--eps", "0.2", "--d", "0.1"]) == 2
    assert "eps <= d" in capsys.readouterr().err


def test_usage_errors_exit_2(capsys):
    assert main([]) == 2
    assert main(["example", "binary", "--p", "0.4"]) == 2
    assert main(["region", "check", "x.json", "--region", "psychic"]) == 2
    assert main(["--threads", "0", "example", "binary", "--p", ".4", "--eps", ".1", "--d", ".2"]) == 2


def test_region_check_separation_member(sep_target, capsys):
    assert main(["region", "check", str(sep_target), "--region", "separation"]) == 0
    out = capsys.readouterr().out
    assert "status: member_with_witness" in out
    assert "I(S;Shat) = 0.278072 bits" in out
    assert "I(X;Y) = 0.713603 bits" in out


def test_region_check_separation_rejects_binary(binary_target, capsys):
    assert main(["region", "check", str(binary_target), "--region", "separation"]) == 1
    cap = capsys.readouterr()
    assert "status: not_found" in cap.out
    assert "not shown to be in the region" in cap.err


def test_region_check_noncausal(binary_target, capsys):
    assert main(["--seed", "1", "region", "check", str(binary_target), "--region", "noncausal", "--card-u", "2"]) == 0
    out = capsys.readouterr().out
    assert "slack = 0.2300" in out and "witness scheme: noncausal" in out


def test_region_check_strict_infeasible(binary_target, capsys):
    assert main(["region", "check", str(binary_target), "--region", "strict"]) == 1
    assert "independent" in capsys.readouterr().out


def test_region_check_bad_files(tmp_path, capsys):
    f = tmp_path / "broken.json"
    f.write_text("{\n  \"type\": ")
    assert main(["region", "check", str(f), "--region", "noncausal"]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["region", "check", str(tmp_path / "nope.json"), "--region", "noncausal"]) == 2
    f.write_text(json.dumps({"type": "pmf"}))
    assert main(["region", "check", str(f), "--region", "noncausal"]) == 2
    assert main(["region", "check", str(f), "--region", "noncausal", "--budget", "0"]) == 2


def _config(tmp_path, **kw):
    d = {"preset": "binary_example", "scheme": "hybrid", "n_values": [50], "trials_per_n": 2,
         "subblock": 50, "master_seed": 1}
    d.update(kw)
    d = {k: v for k, v in d.items() if v is not None}
    f = tmp_path / "cfg.json"
    f.write_text(json.dumps(d))
    return f


def test_simulate_config_errors_exit_2(tmp_path, capsys):
    f = _config(tmp_path, trials_per_n=0, colour="red")
    assert main(["simulate", str(f)]) == 2
    err = capsys.readouterr().err
    assert "config error: trials_per_n" in err and "config error: unknown keys ['colour']" in err
    assert main(["simulate", str(tmp_path / "nope.json")]) == 2


def test_simulate_writes_results(tmp_path, capsys):
    f = _config(tmp_path)
    out, plot = tmp_path / "r.csv", tmp_path / "p.csv"
    assert main(["--threads", "2", "simulate", str(f), "--out", str(out), "--plotdata", str(plot)]) == 0
    assert len(out.read_text().splitlines()) == 3
    assert len(plot.read_text().splitlines()) == 2
    assert "hybrid: 2 rows" in capsys.readouterr().out


def test_simulate_json_to_stdout(tmp_path, capsys):
    assert main(["simulate", str(_config(tmp_path)), "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["scheme"] == "hybrid" and len(doc["rows"]) == 2


def test_simulate_no_witness_exit_1(tmp_path, capsys):
    # X depends on S in the binary example, so no strictly causal witness exists
    t = binary_example().target
    f = _config(tmp_path, preset=None, problem={"source": P.to_dict(t.source), "channel": P.to_dict(t.channel)},
                target=target_to_dict(t), scheme="blockmarkov_strict", B=2, subblock=25)
    assert main(["simulate", str(f)]) == 1
    assert "no witness" in capsys.readouterr().err


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "coordlab", "example", "binary", "--p", "0.4", "--eps", "0.1",
                        "--d", "0.2"], capture_output=True, text=True)
    assert r.returncode == 0 and "slack = 0.2301" in r.stdout
