import json

import numpy as np
import pytest

from promogen.cli import main
from promogen.motion import (
    extract_trajectory,
    gather_anchors,
    load_pmg,
    save_trajectory_csv,
)
from promogen.pipeline import load_checkpoint
from promogen.synthetic import SyntheticSpec, generate_synthetic


def write_config(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


TRAIN_DOC = {
    "synthetic": {"count": 8, "n_frames": 16, "seed": 2},
    "train": {
        "e_total": 1, "e_stage": 1, "batch_size": 4, "t_steps": 10,
        "max_iterations": 2, "seed": 0,
        "network": {"d": 8, "blocks": 1, "heads": 2, "feature_dim": 66,
                    "anchor_dim": 63, "n_max": 16},
    },
}


def test_gen_data_writes_dataset(tmp_path, capsys):
    cfg = write_config(tmp_path, {"synthetic": {"count": 3, "n_frames": 16}})
    out = tmp_path / "data"
    assert main(["gen-data", "--config", cfg, "--out", str(out)]) == 0
    reply = json.loads(capsys.readouterr().out)
    assert reply["count"] == 3
    files = sorted(out.glob("*.pmg"))
    assert len(files) == 3
    m = load_pmg(str(files[0]))
    assert m.n_frames == 16


def test_gen_data_seed_flag_overrides(tmp_path, capsys):
    cfg = write_config(tmp_path, {"synthetic": {"count": 1, "n_frames": 16,
                                                "seed": 0}})
    out = tmp_path / "data"
    assert main(["gen-data", "--config", cfg, "--seed", "5",
                 "--out", str(out)]) == 0
    expect = generate_synthetic(SyntheticSpec(count=1, n_frames=16, seed=5))[0]
    got = load_pmg(str(next(out.glob("*.pmg"))))
    np.testing.assert_allclose(got.features, expect.features, atol=1e-6)


@pytest.fixture(scope="module")
def trained_checkpoint(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli-train")
    cfg = write_config(tmp, TRAIN_DOC)
    ck = tmp / "model.pmgc"
    code = main(["train", "--config", cfg, "--out", str(ck)])
    assert code == 0
    return str(ck)


def test_train_writes_checkpoint_and_log(tmp_path, capsys):
    cfg = write_config(tmp_path, TRAIN_DOC)
    ck = tmp_path / "model.pmgc"
    assert main(["train", "--config", cfg, "--out", str(ck)]) == 0
    text = capsys.readouterr().out
    assert '"final_loss"' in text
    assert '"k_min"' in text
    bundle = load_checkpoint(str(ck))
    assert bundle.config.max_iterations == 2


def test_sample_command_end_to_end(trained_checkpoint, tmp_path, capsys):
    motion = generate_synthetic(SyntheticSpec(count=1, n_frames=16, seed=9))[0]
    csv = tmp_path / "traj.csv"
    save_trajectory_csv(extract_trajectory(motion), str(csv))
    anchors = gather_anchors(motion, np.array([2, 9]))
    anc = tmp_path / "anchors.json"
    anc.write_text(json.dumps({
        "positions": anchors.positions.tolist(),
        "poses": anchors.poses.tolist(),
    }))
    cfg = write_config(tmp_path, {"sample": {
        "checkpoint": trained_checkpoint,
        "trajectory": str(csv),
        "anchors": str(anc),
        "steps": 3,
        "svg": True,
    }})
    out = tmp_path / "gen.pmg"
    assert main(["sample", "--config", cfg, "--seed", "7",
                 "--out", str(out)]) == 0
    reply = json.loads(capsys.readouterr().out)
    assert reply["frames"] == 16
    assert load_pmg(str(out)).n_frames == 16
    svg = tmp_path / "gen.svg"
    assert svg.exists() and "<svg" in svg.read_text()


def test_sample_anchors_only(trained_checkpoint, tmp_path, capsys):
    motion = generate_synthetic(SyntheticSpec(count=1, n_frames=16, seed=9))[0]
    anchors = gather_anchors(motion, np.array([0, 12]))
    anc = tmp_path / "anchors.json"
    anc.write_text(json.dumps({
        "positions": anchors.positions.tolist(),
        "poses": anchors.poses.tolist(),
        "n_frames": 16,
    }))
    cfg = write_config(tmp_path, {"sample": {
        "checkpoint": trained_checkpoint, "anchors": str(anc), "steps": 2,
    }})
    assert main(["sample", "--config", cfg]) == 0
    assert json.loads(capsys.readouterr().out)["frames"] == 16


def test_eval_command_writes_report(trained_checkpoint, tmp_path, capsys):
    data_dir = tmp_path / "data"
    gen_cfg = write_config(
        tmp_path, {"synthetic": {"count": 3, "n_frames": 16}}, "g.json")
    main(["gen-data", "--config", gen_cfg, "--out", str(data_dir)])
    capsys.readouterr()
    cfg = write_config(tmp_path, {"eval": {
        "checkpoint": trained_checkpoint,
        "data_dir": str(data_dir),
        "protocol": [1, 2],
        "steps": 2,
        "items": 2,
    }})
    report_path = tmp_path / "report.json"
    assert main(["eval", "--config", cfg, "--seed", "3",
                 "--out", str(report_path)]) == 0
    doc = json.loads(report_path.read_text())
    assert doc["protocol"] == [1, 2]
    assert doc["n_items"] == 2
    assert set(doc["per_fn"]) == {"1", "2"}


def test_fm_sample_respects_gap(tmp_path, capsys):
    cfg = write_config(tmp_path, {"fm": {"n_frames": 12, "count": 3,
                                         "gap": 2, "draws": 5}})
    assert main(["fm-sample", "--config", cfg, "--seed", "1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["count_valid"] == 56
    assert len(doc["positions"]) == 5
    for draw in doc["positions"]:
        assert len(draw) == 3
        assert all(b - a >= 3 for a, b in zip(draw, draw[1:]))


def test_fm_sample_short_config_flag(tmp_path, capsys):
    cfg = write_config(tmp_path, {"fm": {"n_frames": 12, "count": 3,
                                         "gap": 2}})
    assert main(["fm-sample", "-c", cfg, "--seed", "1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["count_valid"] == 56


def test_schedule_dump(tmp_path, capsys):
    cfg = write_config(tmp_path, {"schedule": {"t_steps": 10,
                                               "kind": "cosine",
                                               "e_stage": 4}})
    out = tmp_path / "sched.json"
    assert main(["schedule-dump", "--config", cfg, "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["alpha_bar"]) == 10
    assert doc["k_min"] == [20, 13, 7, 1]
    assert doc["kind"] == "cosine"


@pytest.mark.parametrize(
    "argv",
    [["train", "--config"], ["nonsense"]],
)
def test_usage_errors_exit_nonzero(argv, tmp_path):
    with pytest.raises(SystemExit):
        main(argv)


def test_runtime_errors_return_one(tmp_path, capsys):
    # train without --out
    cfg = write_config(tmp_path, TRAIN_DOC)
    assert main(["train", "--config", cfg]) == 1
    assert "error:" in capsys.readouterr().err
    # sample without a checkpoint key
    cfg2 = write_config(tmp_path, {"sample": {}}, "s.json")
    assert main(["sample", "--config", cfg2]) == 1
    # config that is not an object
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    assert main(["gen-data", "--config", str(bad), "--out",
                 str(tmp_path / "d")]) == 1
    # config file that is not JSON at all
    worse = tmp_path / "worse.json"
    worse.write_text("{nope")
    assert main(["gen-data", "--config", str(worse), "--out",
                 str(tmp_path / "d2")]) == 1
    # eval against a missing checkpoint file
    cfg3 = write_config(tmp_path, {"eval": {"checkpoint":
                                            str(tmp_path / "missing.pmgc")}},
                        "e.json")
    assert main(["eval", "--config", cfg3]) == 1
