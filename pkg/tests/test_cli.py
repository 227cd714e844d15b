import numpy as np
import pytest

from spikectrl.checkpoint import load_checkpoint
from spikectrl.cli import main, run_eval, run_training
from spikectrl.config import parse_config
from spikectrl.metrics import read_csv

TINY = {
    "hidden_size": "8", "sub_steps": "2", "episode_steps": "12",
    "warmup_steps": "2", "unroll_prediction": "3", "unroll_policy": "4",
    "eval_unroll_horizon": "3", "episodes_per_iteration": "2",
    "buffer_capacity": "2", "batches_prediction": "1", "batches_policy": "1",
    "batch_prediction": "2", "batch_policy": "2", "iterations": "2",
    "checkpoint_every": "1", "seed": "5",
}


def tiny_cfg(**kw):
    merged = dict(TINY)
    merged.update({k: str(v) for k, v in kw.items()})
    return parse_config(overrides=merged)


def quiet(*args, **kwargs):
    pass


def test_same_seed_runs_produce_identical_csv_bytes(tmp_path):
    run_training(tiny_cfg(), tmp_path / "a", log=quiet)
    run_training(tiny_cfg(), tmp_path / "b", log=quiet)
    assert (tmp_path / "a/metrics.csv").read_bytes() \
        == (tmp_path / "b/metrics.csv").read_bytes()


def test_zero_iterations_writes_single_eval_row(tmp_path):
    run_training(tiny_cfg(iterations=0), tmp_path / "z", log=quiet)
    rows = read_csv(tmp_path / "z/metrics.csv")
    assert len(rows) == 1
    assert rows[0]["iteration"] == 0
    assert np.isnan(rows[0]["pred_loss"])
    assert rows[0]["mean_cumulative_distance"] > 0.0


def test_checkpoint_cadence_and_final_copy(tmp_path):
    run_training(tiny_cfg(iterations=4, checkpoint_every=2), tmp_path / "c",
                 log=quiet)
    names = sorted(p.name for p in (tmp_path / "c").glob("*.ckpt"))
    assert "checkpoint_0002.ckpt" in names
    assert "checkpoint_0004.ckpt" in names
    assert "final.ckpt" in names
    assert (tmp_path / "c/final.ckpt").read_bytes() \
        == (tmp_path / "c/checkpoint_0004.ckpt").read_bytes()


def test_eval_of_saved_checkpoint_matches_last_training_row(tmp_path):
    run_training(tiny_cfg(), tmp_path / "t", log=quiet)
    run_eval(tmp_path / "t/final.ckpt", {}, tmp_path / "e", log=quiet)
    train_rows = (tmp_path / "t/metrics.csv").read_text().strip().split("\n")
    eval_rows = (tmp_path / "e/eval.csv").read_text().strip().split("\n")
    assert eval_rows[0] == train_rows[0]          # same header
    assert eval_rows[1] == train_rows[-1]         # byte-identical row


def test_eval_is_side_effect_free_and_deterministic(tmp_path):
    run_training(tiny_cfg(), tmp_path / "t", log=quiet)
    ckpt = tmp_path / "t/final.ckpt"
    before = ckpt.read_bytes()
    run_eval(ckpt, {}, tmp_path / "e1", log=quiet)
    run_eval(ckpt, {}, tmp_path / "e2", log=quiet)
    assert ckpt.read_bytes() == before
    assert (tmp_path / "e1/eval.csv").read_bytes() \
        == (tmp_path / "e2/eval.csv").read_bytes()


def test_eval_with_random_episodes_appends_row(tmp_path):
    run_training(tiny_cfg(), tmp_path / "t", log=quiet)
    rows = run_eval(tmp_path / "t/final.ckpt", {}, tmp_path / "e",
                    random_episodes=3, log=quiet)
    assert len(rows) == 2


def test_resume_matches_uninterrupted_run(tmp_path):
    # resuming from the 4-iteration run's own midpoint checkpoint replays
    # iterations 3 and 4 exactly: buffer capacity equals episodes per
    # iteration, so the replay contents are rebuilt by the resumed
    # iteration's collection
    cfg = tiny_cfg(iterations=4, checkpoint_every=2)
    run_training(cfg, tmp_path / "full", log=quiet)
    run_training(cfg, tmp_path / "resumed",
                 resume=tmp_path / "full/checkpoint_0002.ckpt", log=quiet)
    full = read_csv(tmp_path / "full/metrics.csv")
    resumed = read_csv(tmp_path / "resumed/metrics.csv")
    assert [r["iteration"] for r in resumed] == [3, 4]
    full_text = (tmp_path / "full/metrics.csv").read_text().strip() \
        .split("\n")
    res_text = (tmp_path / "resumed/metrics.csv").read_text().strip() \
        .split("\n")
    # full csv lines: header, iteration 0 eval row, then iterations 1..4
    assert res_text[1] == full_text[4]
    assert res_text[2] == full_text[5]
    assert len(full) == 5 and len(resumed) == 2


def test_resumed_final_checkpoint_matches_uninterrupted(tmp_path):
    cfg = tiny_cfg(iterations=4, checkpoint_every=2)
    run_training(cfg, tmp_path / "full", log=quiet)
    run_training(cfg, tmp_path / "resumed",
                 resume=tmp_path / "full/checkpoint_0002.ckpt", log=quiet)
    a = load_checkpoint(tmp_path / "full/final.ckpt")
    b = load_checkpoint(tmp_path / "resumed/final.ckpt")
    assert a.iteration == b.iteration == 4
    assert a.rng_state == b.rng_state
    for name in a.arrays:
        assert np.array_equal(a.arrays[name], b.arrays[name]), name


def test_nonfinite_loss_aborts_with_crash_checkpoint(tmp_path, monkeypatch):
    import spikectrl.cli as cli_mod

    def explode(*args, **kwargs):
        raise ValueError("non-finite values in prediction loss")

    monkeypatch.setattr(cli_mod, "training_iteration", explode)
    with pytest.raises(SystemExit, match="non-finite"):
        run_training(tiny_cfg(), tmp_path / "crash", log=quiet)
    assert (tmp_path / "crash/crash.ckpt").exists()


def test_cli_train_and_eval_subcommands(tmp_path):
    out = tmp_path / "run"
    args = ["train", "--out", str(out)]
    for key, val in TINY.items():
        args += [f"--{key}", val]
    assert main(args) == 0
    assert (out / "metrics.csv").exists()
    assert main(["eval", "--checkpoint", str(out / "final.ckpt"),
                 "--out", str(tmp_path / "ev")]) == 0
    assert (tmp_path / "ev/eval.csv").exists()


def test_cli_config_file_plus_flag_override(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("".join(f"{k} = {v}\n" for k, v in TINY.items()))
    out = tmp_path / "run"
    assert main(["train", "--config", str(cfg_file), "--iterations", "0",
                 "--out", str(out)]) == 0
    assert len(read_csv(out / "metrics.csv")) == 1


def test_cli_rejects_invalid_value(tmp_path, capsys):
    assert main(["train", "--tau_mem", "-1", "--out",
                 str(tmp_path / "x")]) == 2
    assert "tau_mem" in capsys.readouterr().err


def test_cli_sweep_creates_cell_directories(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    tiny = dict(TINY)
    tiny["iterations"] = "1"
    cfg_file.write_text("".join(f"{k} = {v}\n" for k, v in tiny.items()))
    out = tmp_path / "sw"
    assert main(["sweep", "--config", str(cfg_file), "--out", str(out),
                 "--grid", "hidden_size=6,8", "--grid", "seed=1,2"]) == 0
    cells = sorted(p.name for p in out.iterdir())
    assert cells == ["hidden_size=6,seed=1", "hidden_size=6,seed=2",
                     "hidden_size=8,seed=1", "hidden_size=8,seed=2"]
    for cell in cells:
        assert (out / cell / "metrics.csv").exists()


def test_config_snapshot_written(tmp_path):
    run_training(tiny_cfg(), tmp_path / "t", log=quiet)
    snap = parse_config(str(tmp_path / "t/config.txt"))
    assert snap == tiny_cfg()
