"""Command-line entry points: train, eval, and sweep.

One master seed derives every stream deterministically: SeedSequence(seed)
spawns the initialization stream (forward model first, then policy) and the
training stream (environment seeds, action noise, batch sampling, teacher
forcing draws, consumed in that fixed order each iteration). Evaluation
uses a fresh stream seeded from (seed, EVAL_STREAM_TAG, iteration), so an
evaluation can be reproduced from a checkpoint alone. Same seed, same
config, same build: byte-identical CSVs.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import os
import sys
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from .buffer import ReplayBuffer
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, parse_config
from .network import Network
from .tensor import set_default_dtype
from .training import evaluate, make_optimizer, training_iteration

EVAL_STREAM_TAG = 1000003
RANDOM_EVAL_TAG = 2000003
TRAIN_STAT_KEYS = ["lr_prediction", "lr_policy", "sigma_u", "pred_loss",
                   "pred_grad_norm", "policy_loss", "policy_grad_norm"]


def default_out_root() -> Path:
    return Path(os.environ.get("SPIKECTRL_RUNS", "runs"))


def _log(message: str) -> None:
    print(message, flush=True)


def build_networks(cfg: RunConfig, rng: np.random.Generator,
                   smooth: bool = False) -> tuple[Network, Network]:
    """(forward model, policy), initialized in that order from one stream."""
    pred = Network(cfg.prediction_network_config(smooth), rng)
    policy = Network(cfg.policy_network_config(smooth), rng)
    return pred, policy


def named_run_arrays(pred, policy, opt_pred, opt_policy):
    arrays = []
    arrays += [(f"pred.{n}", t.data) for n, t in pred.named_parameters()]
    arrays += [(f"policy.{n}", t.data) for n, t in policy.named_parameters()]
    arrays += [(f"opt_pred.{n}", a)
               for n, a in opt_pred.named_state_arrays()]
    arrays += [(f"opt_policy.{n}", a)
               for n, a in opt_policy.named_state_arrays()]
    return arrays


def load_run_arrays(ck: Checkpoint, pred, policy, opt_pred, opt_policy):
    for prefix, net in (("pred", pred), ("policy", policy)):
        for name, t in net.named_parameters():
            key = f"{prefix}.{name}"
            if key not in ck.arrays:
                raise ValueError(f"checkpoint is missing array {key!r}")
            arr = ck.arrays[key]
            if arr.shape != t.data.shape:
                raise ValueError(
                    f"checkpoint array {key!r} has shape {arr.shape}, "
                    f"expected {t.data.shape}")
            t.data[...] = arr.astype(t.data.dtype)
    for prefix, opt in (("opt_pred", opt_pred), ("opt_policy", opt_policy)):
        state = {name: ck.arrays[f"{prefix}.{name}"].astype(float)
                 for name, _ in opt.named_state_arrays()}
        opt.load_state_arrays(state, ck.adam_t[prefix])


def eval_rng_for(cfg: RunConfig, iteration: int,
                 tag: int = EVAL_STREAM_TAG) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([cfg.seed, tag, iteration])))


def _eval_row(cfg: RunConfig, policy, pred, iteration: int,
              stats: dict) -> dict:
    metrics = evaluate(policy, pred, cfg.episode_config(), cfg.train_config(),
                       eval_rng_for(cfg, iteration))
    row = {"iteration": iteration}
    row.update({k: stats.get(k, float("nan")) for k in TRAIN_STAT_KEYS})
    row.update(metrics)
    return row


def _save_run_checkpoint(path, cfg, iteration, pred, policy, opt_pred,
                         opt_policy, g_train, stats):
    save_checkpoint(
        path, cfg, iteration,
        named_run_arrays(pred, policy, opt_pred, opt_policy),
        adam_t={"opt_pred": opt_pred.t, "opt_policy": opt_policy.t},
        rng_state=g_train.bit_generator.state,
        stats={k: float(stats.get(k, float("nan")))
               for k in TRAIN_STAT_KEYS})


def run_training(cfg: RunConfig, out_dir, resume: str | None = None,
                 log=_log) -> list[dict]:
    """Execute the full training loop; returns the metric rows written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows: list[dict] = []

    if resume is None:
        set_default_dtype(cfg.precision)
        ss = np.random.SeedSequence(cfg.seed)
        init_ss, train_ss = ss.spawn(2)
        g_init = np.random.Generator(np.random.PCG64(init_ss))
        g_train = np.random.Generator(np.random.PCG64(train_ss))
        pred, policy = build_networks(cfg, g_init)
        opt_pred, opt_policy = make_optimizer(pred), make_optimizer(policy)
        start = 0
        stats: dict = {}
        rows.append(_eval_row(cfg, policy, pred, 0, stats))
    else:
        ck = load_checkpoint(resume)
        cfg = ck.config
        set_default_dtype(cfg.precision)
        dummy = np.random.Generator(np.random.PCG64(cfg.seed))
        pred, policy = build_networks(cfg, dummy)
        opt_pred, opt_policy = make_optimizer(pred), make_optimizer(policy)
        load_run_arrays(ck, pred, policy, opt_pred, opt_policy)
        g_train = np.random.Generator(np.random.PCG64())
        g_train.bit_generator.state = ck.rng_state
        start = ck.iteration
        stats = dict(ck.stats)

    tcfg = cfg.train_config()
    env_cfg = cfg.episode_config()
    buffer = ReplayBuffer(cfg.buffer_capacity)

    with open(out / "config.txt", "w", encoding="utf-8") as fh:
        fh.writelines(f"{k} = {v}\n" for k, v in cfg.to_items())

    for t in range(start, cfg.iterations):
        try:
            stats = training_iteration(policy, pred, buffer, tcfg, env_cfg,
                                       opt_policy, opt_pred, g_train, t)
        except ValueError as err:
            _save_run_checkpoint(out / "crash.ckpt", cfg, t, pred, policy,
                                 opt_pred, opt_policy, g_train, stats)
            metrics_mod.write_csv(rows, out / "metrics.csv")
            raise SystemExit(
                f"training aborted at iteration {t + 1}: {err}; "
                f"crash checkpoint written to {out / 'crash.ckpt'}")
        row = _eval_row(cfg, policy, pred, t + 1, stats)
        rows.append(row)
        log(f"iter {t + 1:4d}  dist {row['mean_cumulative_distance']:.4f}  "
            f"success {row['success_rate']:.2f}  "
            f"on-target {row['time_on_target_mean']:.1f}  "
            f"mse {row['unrolled_state_mse']:.5f}")
        if (t + 1) % cfg.checkpoint_every == 0 or t + 1 == cfg.iterations:
            _save_run_checkpoint(out / f"checkpoint_{t + 1:04d}.ckpt", cfg,
                                 t + 1, pred, policy, opt_pred, opt_policy,
                                 g_train, stats)
    if cfg.iterations == 0 or start >= cfg.iterations:
        _save_run_checkpoint(out / f"checkpoint_{start:04d}.ckpt", cfg, start,
                             pred, policy, opt_pred, opt_policy, g_train,
                             stats)
    final = sorted(out.glob("checkpoint_*.ckpt"))[-1]
    final_bytes = final.read_bytes()
    (out / "final.ckpt").write_bytes(final_bytes)
    metrics_mod.write_csv(rows, out / "metrics.csv")
    return rows


def run_eval(checkpoint_path, overrides: dict[str, str], out_dir,
             random_episodes: int = 0, log=_log) -> list[dict]:
    """Evaluate a checkpoint on the fixed task set (plus optional random tasks)."""
    ck = load_checkpoint(checkpoint_path)
    cfg = ck.config
    if overrides:
        merged = dict(cfg.to_items())
        merged.update(overrides)
        cfg = parse_config(overrides={k: str(v) for k, v in merged.items()})
    set_default_dtype(cfg.precision)
    dummy = np.random.Generator(np.random.PCG64(cfg.seed))
    pred, policy = build_networks(cfg, dummy)
    opt_pred, opt_policy = make_optimizer(pred), make_optimizer(policy)
    load_run_arrays(ck, pred, policy, opt_pred, opt_policy)

    rows = [_eval_row(cfg, policy, pred, ck.iteration, ck.stats)]
    if random_episodes > 0:
        metrics = evaluate(policy, pred, cfg.episode_config(),
                           cfg.train_config(),
                           eval_rng_for(cfg, ck.iteration, RANDOM_EVAL_TAG),
                           random_count=random_episodes)
        row = {"iteration": ck.iteration}
        row.update({k: ck.stats.get(k, float("nan"))
                    for k in TRAIN_STAT_KEYS})
        row.update(metrics)
        rows.append(row)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics_mod.write_csv(rows, out / "eval.csv")
    for row in rows:
        log(f"eval iter {row['iteration']}  "
            f"dist {row['mean_cumulative_distance']:.4f}  "
            f"success {row['success_rate']:.2f}")
    return rows


def run_sweep(config_path, base_overrides: dict[str, str],
              grids: list[tuple[str, list[str]]], out_dir, log=_log) -> None:
    """Cartesian grid over the listed keys, one subdirectory per cell."""
    out = Path(out_dir)
    keys = [k for k, _ in grids]
    for combo in itertools.product(*[vals for _, vals in grids]):
        overrides = dict(base_overrides)
        overrides.update(dict(zip(keys, combo)))
        cell = ",".join(f"{k}={v}" for k, v in zip(keys, combo))
        cfg = parse_config(config_path, overrides)
        log(f"sweep cell: {cell}")
        run_training(cfg, out / cell, log=log)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    for f in dataclasses.fields(RunConfig):
        parser.add_argument(f"--{f.name}", dest=f"cfg_{f.name}",
                            metavar="V", default=None,
                            help=f"override config key {f.name}")


def _collect_overrides(args) -> dict[str, str]:
    out = {}
    for f in dataclasses.fields(RunConfig):
        val = getattr(args, f"cfg_{f.name}", None)
        if val is not None:
            out[f.name] = val
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="spikectrl",
        description="Train and evaluate spiking predictive-control models "
                    "on the planar reaching task.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the training loop")
    p_train.add_argument("--config", default=None, help="config file path")
    p_train.add_argument("--out", default=None, help="output directory")
    p_train.add_argument("--resume", default=None,
                         help="checkpoint to resume from (its config "
                              "snapshot takes precedence)")
    _add_config_flags(p_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--out", default=None)
    p_eval.add_argument("--random-episodes", type=int, default=0,
                        help="additionally evaluate this many random tasks")
    _add_config_flags(p_eval)

    p_sweep = sub.add_parser("sweep", help="cartesian grid of training runs")
    p_sweep.add_argument("--config", default=None)
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--grid", action="append", default=[],
                         metavar="KEY=V1,V2,...", required=False)
    _add_config_flags(p_sweep)

    args = parser.parse_args(argv)
    overrides = _collect_overrides(args)
    try:
        if args.command == "train":
            if args.resume is not None:
                cfg = load_checkpoint(args.resume).config
            else:
                cfg = parse_config(args.config, overrides)
            out = args.out or default_out_root() / f"run-seed{cfg.seed}"
            run_training(cfg, out, resume=args.resume)
        elif args.command == "eval":
            out = args.out or default_out_root() / "eval"
            run_eval(args.checkpoint, overrides, out,
                     random_episodes=args.random_episodes)
        else:
            grids = []
            for spec in args.grid:
                if "=" not in spec:
                    raise ConfigError(f"malformed --grid {spec!r}")
                key, vals = spec.split("=", 1)
                grids.append((key.strip(), vals.split(",")))
            if not grids:
                raise ConfigError("sweep requires at least one --grid")
            out = args.out or default_out_root() / "sweep"
            run_sweep(args.config, overrides, grids, out)
    except (ConfigError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
