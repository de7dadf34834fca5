import json

import numpy as np
import pytest

from nlosloc import cli
from nlosloc.nn import io as wio

FAST = ["--epochs", "2", "--stop-epochs", "2", "--patience", "1"]


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("simulate", "--scene", "toy", "--tracks", 4, "--samples", 40, "--out", d / "ds") == 0
    assert run("simulate", "--scene", "toy-moved", "--tracks", 4, "--samples", 40, "--out", d / "moved") == 0
    assert run("train", "--dataset", d / "ds", *FAST, "--out", d / "m.nlml") == 0
    return d


def test_simulate_byte_identical(work):
    assert run("simulate", "--scene", "toy", "--tracks", 4, "--samples", 40, "--out", work / "again") == 0
    assert (work / "again.bin").read_bytes() == (work / "ds.bin").read_bytes()
    assert (work / "again.jsonl").read_bytes() == (work / "ds.jsonl").read_bytes()
    head = json.loads((work / "ds.jsonl").read_text().splitlines()[0])
    assert head["config"]["tracks"] == 4 and len(head["config_hash"]) == 16


def test_features_widths(work):
    assert run("features", "--dataset", work / "ds", "--feature", "fr-pp", "--out", work / "fpp") == 0
    pp = np.load(work / "fpp.npy")
    assert run("features", "--dataset", work / "ds", "--feature", "td", "--combo", "tof,aoa",
               "--paths", "dominant", "--uncertainty", "off", "--out", work / "ftd") == 0
    td = np.load(work / "ftd.npy")
    assert pp.shape[0] == td.shape[0] == 160
    assert pp.shape[1] % 2 == 0
    assert td.shape[1] == 2 * 4
    meta = json.loads((work / "ftd.json").read_text())
    assert meta["uncertainty"]["tof_std_m"] == 0.0 and meta["config"]["uncertainty"] is False


def test_eval_reports_share_schema(work):
    assert run("eval", "--model", work / "m.nlml", "--dataset", work / "ds", "--out", work / "nn.json") == 0
    assert run("ekf", "--dataset", work / "ds", "--out", work / "ekf.json") == 0
    a = json.loads((work / "nn.json").read_text())
    b = json.loads((work / "ekf.json").read_text())
    assert set(a) == set(b) == {"name", "meta", "aggregates", "samples"}
    assert "config_hash" in a["meta"] and "config_hash" in b["meta"]
    assert run("report", work / "nn.json", work / "ekf.json", "--out", work / "t.tsv") == 0
    assert (work / "t.tsv").read_text().startswith("name\t")


def test_eval_refuses_foreign_dataset(work, capsys):
    assert run("eval", "--model", work / "m.nlml", "--dataset", work / "moved") == 1
    assert "--force" in capsys.readouterr().err
    assert run("eval", "--model", work / "m.nlml", "--dataset", work / "moved", "--force",
               "--out", work / "forced.json") == 0
    assert json.loads((work / "forced.json").read_text())["meta"]["lineage_forced"] is True


def test_transfer_freezes_all_but_first(work):
    assert run("transfer", "--model", work / "m.nlml", "--dataset", work / "moved", "--fraction", 0.1,
               *FAST, "--out", work / "tl.nlml") == 0
    src, _, _ = wio.load(work / "m.nlml")
    dst, _, meta = wio.load(work / "tl.nlml")
    for k in src:
        same = src[k].tobytes() == dst[k].tobytes()
        assert same != k.startswith("dense1/")
    assert meta["trainable"] == ["dense1"] and meta["fraction"] == 0.1
    assert run("eval", "--model", work / "tl.nlml", "--dataset", work / "moved", "--out", work / "tl.json") == 0


def test_sequence_train(work):
    assert run("train", "--dataset", work / "ds", "--model", "sequence", "--window", 10, "--stride", 10,
               *FAST, "--out", work / "s.nlml") == 0
    _, man, meta = wio.load(work / "s.nlml")
    assert man["kind"] == "sequence" and meta["window"] == 10


def test_user_errors_exit_1(work, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"sceen": "toy"}))
    assert run("simulate", "--config", bad) == 1
    assert run("simulate", "--scene", "nowhere") == 1
    assert run("train", "--dataset", tmp_path / "missing") == 1
    assert run("train", "--dataset", work / "ds", "--feature", "fr-xx") == 1
    with pytest.raises(SystemExit) as e:
        run("train")
    assert e.value.code == 1


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("scene: toy\ntracks: 5\nschedule:\n  patience: 3\n")
    args = cli.build_parser().parse_args(["train", "--config", str(cfg), "--dataset", "x", "--epochs", "4"])
    rc = cli.resolve_config(args)
    assert rc.tracks == 5 and rc.scene == "toy"
    assert rc.schedule == {"patience": 3, "phase1_epochs": 4}
    with pytest.raises(cli.ConfigError):
        cli.RunConfig.from_dict({"schedule": {"nope": 1}})


def test_internal_error_exit_2(monkeypatch):
    def boom(cfg, args):
        raise RuntimeError("bug")
    monkeypatch.setitem(cli.COMMANDS, "report", boom)
    assert run("report", "x.json") == 2
