"""Training loop, metrics CSV, manifest and checkpoints."""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import math
import os
from pathlib import Path

from . import __version__
from .algorithms.common import CSV_FIELDS
from .algorithms.dqn_her import DqnConfig, DqnHerTrainer, QNetwork
from .algorithms.hem import HemConfig, HemTrainer
from .algorithms.policy_gradient import PgConfig, PolicyGradientTrainer
from .config import ExperimentConfig
from .envs import make_env
from .policy import ExploreCfg, encoder_from_json, make_policy, policy_from_json
from .rng import stream, worker_streams

log = logging.getLogger(__name__)


def resolve_workers(cfg: ExperimentConfig) -> int:
    env_threads = os.environ.get("HEM_THREADS")
    return max(1, int(env_threads)) if env_threads else cfg.workers


def build_trainer(cfg: ExperimentConfig):
    env = make_env(cfg.env.name, cfg.env.K, cfg.env.horizon)
    explore = ExploreCfg(cfg.explore.mode, cfg.explore.epsilon, cfg.explore.sigma)
    init_seed = int(stream(cfg.seed, "init").integers(2**31))
    if cfg.algorithm == "dqn_her":
        qnet = QNetwork.for_env(env, tuple(cfg.hidden), init_seed, gamma=cfg.gamma,
                                sync_interval=cfg.sync_interval, reward_mode=cfg.reward_mode, lr=cfg.lr)
        dcfg = DqnConfig(cfg.n_trajectories, cfg.gradient_steps, cfg.batch_size, cfg.k_her,
                         explore, cfg.eval_episodes)
        return DqnHerTrainer(qnet, env, dcfg, cfg.capacity)
    policy = make_policy(env, tuple(cfg.hidden), init_seed, math.log(cfg.init_std), cfg.learn_std)
    if cfg.algorithm == "hem":
        hcfg = HemConfig(cfg.n_trajectories, cfg.gradient_steps, cfg.batch_size, cfg.lr, explore,
                         cfg.eval_episodes, cfg.original_fraction)
        return HemTrainer(policy, env, hcfg, cfg.capacity)
    pcfg = PgConfig(cfg.n_trajectories, cfg.lr, cfg.baseline, cfg.goals_per_episode,
                    cfg.eval_episodes, explore)
    return PolicyGradientTrainer(policy, env, pcfg, hindsight=cfg.algorithm == "hpg")


def iteration_streams(seed: int, iteration: int, workers: int):
    return (
        worker_streams(seed, workers, "collect", iteration),
        stream(seed, "train", iteration),
        stream(seed, "eval", iteration),
    )


def train(cfg: ExperimentConfig, on_row=None):
    """Run to budget in memory; returns (trainer, rows)."""
    trainer = build_trainer(cfg)
    workers = resolve_workers(cfg)
    rows = []
    while trainer.env_steps < cfg.total_env_steps:
        row = trainer.step(*iteration_streams(cfg.seed, trainer.iteration, workers))
        rows.append(row)
        if on_row is not None:
            on_row(row)
    return trainer, rows


def save_checkpoint(trainer, cfg: ExperimentConfig, path: Path) -> None:
    data = {"env": {"name": cfg.env.name, "K": cfg.env.K, "horizon": cfg.env.horizon},
            "model": trainer.policy.to_json()}
    path.write_text(json.dumps(data))


def load_checkpoint(path: str | Path):
    data = json.loads(Path(path).read_text())
    env = make_env(data["env"]["name"], data["env"]["K"], data["env"].get("horizon"))
    model = data["model"]
    if model["mode"] == "qnet":
        from .nn import MlpParams

        qnet = QNetwork(MlpParams.from_json(model["net"]), encoder_from_json(model["encoder"]),
                        gamma=model["gamma"], reward_mode=model["reward_mode"])
        return qnet, env
    return policy_from_json(model), env


def run_experiment(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.csv"
    ckpt_path = out / "checkpoint.json"
    manifest = {
        "config": cfg.to_dict(),
        "version": __version__,
        "start_time": dt.datetime.now(dt.timezone.utc).isoformat(),
        "metrics": metrics_path.name,
        "checkpoint": ckpt_path.name,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))

    with open(metrics_path, "w", newline="", encoding="utf-8") as fh, \
            open(out / "timings.csv", "w", newline="", encoding="utf-8") as tfh:
        writer = csv.writer(fh, lineterminator="\n")
        timings = csv.writer(tfh, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        timings.writerow(("iteration", "wall_clock_s"))

        def on_row(row):
            timings.writerow((row.iteration, f"{row.wall_clock_s:.3f}"))
            if not cfg.record_wall_clock:
                row.wall_clock_s = 0.0
            writer.writerow(row.as_csv())
            fh.flush()
            tfh.flush()

        trainer, rows = train(cfg, on_row)
    if len(rows) == 1 and rows[0].env_steps >= cfg.total_env_steps:
        log.warning("env-step budget %d is smaller than one iteration (%d steps)",
                    cfg.total_env_steps, rows[0].env_steps)
        manifest["warnings"] = ["budget smaller than one iteration; ran a single iteration"]
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    save_checkpoint(trainer, cfg, ckpt_path)
    return metrics_path
