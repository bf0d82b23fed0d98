import json

import numpy as np
import pytest

from coreperiphery.cli import main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def graph_file(tmp_path):
    out = tmp_path / "gen"
    assert run("synth", "generate", "--set", "kind=matrix", "--set", "sizes=20,40",
               "--set", "matrix=0.6,0.2;0.2,0.05", "--seed", 3, "--out", out) == 0
    return out / "graph.txt"


def test_generate_outputs(graph_file):
    d = graph_file.parent
    assert (d / "planted.csv").read_text().splitlines()[0] == "label,block"
    man = json.loads((d / "manifest.json").read_text())
    assert set(man["outputs"]) == {"graph.txt", "planted.csv"}
    assert man["seed"] == 3 and "duration_s" in man and man["version"]


def test_kcores_and_twoblock(graph_file, tmp_path):
    assert run("kcores", graph_file, "--out", tmp_path / "k") == 0
    rows = (tmp_path / "k" / "kcores.csv").read_text().splitlines()
    assert rows[0] == "label,block,core_number" and len(rows) == 61
    assert run("twoblock", graph_file, "--out", tmp_path / "t") == 0
    assert json.loads((tmp_path / "t" / "twoblock.json").read_text())["core_size"] > 0


def test_infer_bad_layers(graph_file, tmp_path, capsys):
    assert run("infer", graph_file, "--model", "layered", "--layers", 0, "--out", tmp_path / "x") == 1
    assert "layers must be ≥ 2" in capsys.readouterr().err


def test_unknown_command():
    with pytest.raises(SystemExit) as exc:
        run("bogus")
    assert exc.value.code == 2


def test_missing_file(tmp_path):
    assert run("kcores", tmp_path / "nope.txt", "--out", tmp_path / "x") == 1


def test_malformed_graph(tmp_path, capsys):
    f = tmp_path / "bad.txt"
    f.write_text("1 2\n3\n")
    assert run("kcores", f, "--out", tmp_path / "x") == 1
    assert "line 2" in capsys.readouterr().err


def test_infer_mdl_coreness_compare(graph_file, tmp_path):
    inf = tmp_path / "inf"
    assert run("infer", graph_file, "--model", "hub-spoke", "--gibbs", 10, "--samples", 1000, "--seed", 1,
               "--out", inf) == 0
    res = json.loads((inf / "infer.json").read_text())
    assert set(res) >= {"model", "layers", "seed", "map_partition", "marginals", "coreness",
                        "acceptance_rate", "log_posterior_trace"}
    assert min(res["map_partition"]) == 1

    for name in ("m1", "m2"):
        assert run("mdl", graph_file, "--partition", inf / "partition.csv", "--model", "hub-spoke",
                   "--samples", 1000, "--seed", 7, "--out", tmp_path / name) == 0
    a = (tmp_path / "m1" / "mdl.json").read_bytes()
    assert a == (tmp_path / "m2" / "mdl.json").read_bytes()
    assert set(json.loads(a)) >= {"dl_bits", "dl_bits_per_edge", "ess", "samples", "seed"}

    assert run("coreness", inf / "infer.json", "--out", tmp_path / "c") == 0
    lines = (tmp_path / "c" / "coreness.csv").read_text().splitlines()
    assert np.allclose([float(x.split(",")[1]) for x in lines[1:]], res["coreness"])

    assert run("compare", inf / "partition.csv", graph_file.parent / "planted.csv", "--out", tmp_path / "cmp") == 0
    cmp = json.loads((tmp_path / "cmp" / "compare.json").read_text())
    assert set(cmp) >= {"vi_bits", "nvi", "ami"}


def test_infer_deterministic(graph_file, tmp_path):
    for name in ("a", "b"):
        assert run("infer", graph_file, "--model", "layered", "--layers", 3, "--gibbs", 6, "--chains", 2,
                   "--samples", 500, "--seed", 4, "--out", tmp_path / name) == 0
    for f in ("infer.json", "partition.csv", "coreness.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_mdl_rejects_bad_partition(graph_file, tmp_path):
    p = tmp_path / "p.csv"
    p.write_text("label,block\n0,1\n")
    assert run("mdl", graph_file, "--partition", p, "--model", "hub-spoke", "--out", tmp_path / "x") == 1


def test_synth_config_file(tmp_path):
    cfg = tmp_path / "d.cfg"
    cfg.write_text("# tiny grid\nn = 60\nmean_degree = 10\ngammas = 3\ndeltas = 0, 1\nreps = 1\ngibbs = 4\nmcmc_per_node = 2\nrestarts = 1\n")
    out = tmp_path / "d"
    assert run("synth", "discernment", "--config", cfg, "--seed", 2, "--threads", 1, "--out", out) == 0
    rows = (out / "discernment.csv").read_text().splitlines()
    assert len(rows) == 3
    man = json.loads((out / "manifest.json").read_text())
    assert str(cfg) in man["inputs"]
    assert run("synth", "discernment", "--config", cfg, "--set", "bogus=1", "--out", tmp_path / "e") == 1


def test_synth_layers(tmp_path):
    out = tmp_path / "l"
    assert run("synth", "layers", "--set", "n=60", "--set", "planted_layers=2", "--set", "fitted_layers=2-3",
               "--set", "reps=1", "--set", "p_inner=0.6", "--set", "p_outer=0.05", "--gibbs", 4, "--mcmc-per-node", 2, "--restarts", 1, "--threads", 1,
               "--out", out) == 0
    assert (out / "layers.csv").read_text().startswith("planted_layers,fitted_layers")


def test_experiment(graph_file, tmp_path, capsys):
    out = tmp_path / "e"
    assert run("experiment", graph_file, "--layer-range", "2-3", "--gibbs", 8, "--restarts", 1,
               "--threads", 1, "--out", out) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["verdict"] in ("hub-and-spoke", "layered", "indeterminate")
    assert "verdict" in capsys.readouterr().out
    assert (out / "partitions.csv").read_text().splitlines()[0] == \
        "label,hub_spoke,layered,two_block,kcores,binned_kcores"
    assert run("experiment", graph_file, "--layer-range", "1-3", "--out", tmp_path / "f") == 1


def test_env_out_dir(graph_file, tmp_path, monkeypatch):
    monkeypatch.setenv("COREPERIPHERY_OUT", str(tmp_path / "envout"))
    assert run("kcores", graph_file) == 0
    assert (tmp_path / "envout" / "kcores" / "manifest.json").exists()
