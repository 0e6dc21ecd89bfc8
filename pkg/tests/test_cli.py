import json
import os

import pytest
from click.testing import CliRunner

from stylefield.cli import main
from stylefield.config import save_config

from conftest import tiny_config


@pytest.fixture(scope="module")
def env(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg_path = str(root / "tiny.ini")
    cfg = tiny_config()
    cfg.train.total_steps = 4
    save_config(cfg, cfg_path)
    ckpt = str(root / "model.ckpt")
    runner = CliRunner()
    r = runner.invoke(main, ["train", "--config", cfg_path, "--out", ckpt,
                             "--log", str(root / "train.log")])
    assert r.exit_code == 0, r.output
    return {"root": root, "cfg": cfg_path, "ckpt": ckpt, "runner": runner}


def test_train_output_and_log(env):
    body = json.loads(open(str(env["root"] / "train.log")).readlines()[-1])
    assert body["step"] == 4
    assert os.path.exists(env["ckpt"])


def test_render_writes_png(env):
    out = str(env["root"] / "r.png")
    r = env["runner"].invoke(main, ["render", "--config", env["cfg"],
                                    "--checkpoint", env["ckpt"],
                                    "--seed", "3", "--res", "32",
                                    "--out", out])
    assert r.exit_code == 0, r.output
    assert open(out, "rb").read()[:4] == b"\x89PNG"


def test_render_without_checkpoint_uses_fresh_model(env):
    out = str(env["root"] / "fresh.png")
    r = env["runner"].invoke(main, ["render", "--config", env["cfg"],
                                    "--seed", "3", "--out", out])
    assert r.exit_code == 0, r.output
    assert os.path.exists(out)


def test_mix_reports_aggregation_layer(env):
    out = str(env["root"] / "m.png")
    r = env["runner"].invoke(main, ["mix", "--config", env["cfg"],
                                    "--checkpoint", env["ckpt"],
                                    "--seed", "1", "--seed-b", "2",
                                    "--crossover", "4", "--out", out])
    assert r.exit_code == 0, r.output
    assert json.loads(r.output)["aggregation_layer"] == 4


def test_interpolate_writes_frames(env):
    out = str(env["root"] / "walk")
    r = env["runner"].invoke(main, ["interpolate", "--config", env["cfg"],
                                    "--checkpoint", env["ckpt"],
                                    "--seed-a", "1", "--seed-b", "2",
                                    "--frames", "3", "--out", out])
    assert r.exit_code == 0, r.output
    assert sorted(os.listdir(out)) == ["frame_000.png", "frame_001.png",
                                       "frame_002.png"]


def test_make_data_writes_dataset(env):
    out = str(env["root"] / "data")
    r = env["runner"].invoke(main, ["make-data", "--config", env["cfg"],
                                    "--out", out, "--count", "3"])
    assert r.exit_code == 0, r.output
    assert len(os.listdir(out)) == 3


def test_bench_table(env):
    r = env["runner"].invoke(main, ["bench", "--config", env["cfg"],
                                    "--res", "16,64"])
    assert r.exit_code == 0, r.output
    table = json.loads(r.output)
    assert [row["resolution"] for row in table["rows"]] == [16, 64]


def test_eval_consistency_json(env):
    r = env["runner"].invoke(main, ["eval-consistency", "--config", env["cfg"],
                                    "--checkpoint", env["ckpt"],
                                    "--styles", "1"])
    assert r.exit_code == 0, r.output
    body = json.loads(r.output)
    assert len(body["reports"]) == 1


def test_extract_geometry(env):
    out = str(env["root"] / "mesh.txt")
    r = env["runner"].invoke(main, ["extract-geometry", "--config", env["cfg"],
                                    "--checkpoint", env["ckpt"],
                                    "--grid", "16", "--out", out])
    assert r.exit_code == 0, r.output
    assert os.path.exists(out)


def test_bad_config_structured_error(env):
    bad = str(env["root"] / "bad.ini")
    open(bad, "w").write("[nope]\nx = 1\n")
    r = env["runner"].invoke(main, ["bench", "--config", bad])
    assert r.exit_code != 0
    # structured JSON error on stderr (mixed into output by the test runner)
    assert "error" in r.output or r.exit_code == 1


def test_bad_checkpoint_structured_error(env):
    bogus = str(env["root"] / "bogus.ckpt")
    open(bogus, "wb").write(b"garbage")
    out = str(env["root"] / "x.png")
    r = env["runner"].invoke(main, ["render", "--config", env["cfg"],
                                    "--checkpoint", bogus, "--out", out])
    assert r.exit_code != 0
