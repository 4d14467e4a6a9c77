"""Operator entry point: train, eval, record-demos, replay, render-test, serve."""

from __future__ import annotations

import glob
import os
import sys

import click
import numpy as np

from .config import ConfigError, RunConfig, load_config


def _load(config_path, task, seed, obs) -> RunConfig:
    cfg = load_config(config_path) if config_path else RunConfig()
    if task:
        cfg.task = task
    if seed is not None:
        cfg.seed = seed
        cfg.train.seed = seed
    if obs:
        cfg.env.obs_mode = obs
    return cfg


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


@click.group()
def main():
    """Surgical irrigation/suction simulator and training stack."""


common = [
    click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                 help="YAML config; defaults reproduce the published tables"),
    click.option("--task", type=click.Choice(["irrigation", "suction"]), default=None),
    click.option("--seed", type=int, default=None),
    click.option("--obs", type=click.Choice(["vision", "vector"]), default=None),
]


def with_common(fn):
    for opt in reversed(common):
        fn = opt(fn)
    return fn


@main.command()
@with_common
@click.option("--steps", type=int, default=None, help="total decision steps")
@click.option("--bc", is_flag=True, help="behavior-cloning auxiliary updates")
@click.option("--gail", is_flag=True, help="GAIL discriminator reward")
@click.option("--demos", "demos_path", type=click.Path(), default=None)
@click.option("--checkpoint", "checkpoint_dir", type=click.Path(), default=None)
@click.option("--metrics", "metrics_path", type=click.Path(), default=None)
def train(config_path, task, seed, obs, steps, bc, gail, demos_path,
          checkpoint_dir, metrics_path):
    """PPO training with optional curriculum, BC, and GAIL."""
    try:
        cfg = _load(config_path, task, seed, obs)
    except (ConfigError, OSError) as exc:
        _fail(str(exc))
    from .learn import Trainer

    demos = None
    if bc or gail:
        if not demos_path:
            _fail("--bc/--gail require --demos")
        demos = _read_demo_dir(demos_path, cfg)
    checkpoint_dir = checkpoint_dir or cfg.paths.checkpoints
    os.makedirs(checkpoint_dir, exist_ok=True)
    metrics_path = metrics_path or cfg.paths.metrics
    try:
        trainer = Trainer(cfg, use_bc=bc, use_gail=gail, demos=demos,
                          metrics_path=metrics_path, checkpoint_dir=checkpoint_dir,
                          log=click.echo)
        summary = trainer.train(steps)
    except (ValueError, RuntimeError) as exc:
        _fail(str(exc))
    click.echo(
        f"done: {summary['steps']} steps, mean return {summary['mean_return']:.3f}, "
        f"completion {summary['completion_rate']:.2f}"
    )


@main.command("eval")
@with_common
@click.option("--episodes", type=int, default=20)
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True),
              default=None)
@click.option("--policy", "policy_kind",
              type=click.Choice(["checkpoint", "scripted", "random"]), default=None)
@click.option("--allow-digest-mismatch", is_flag=True)
def eval_cmd(config_path, task, seed, obs, episodes, checkpoint_path, policy_kind,
             allow_digest_mismatch):
    """Deterministic policy evaluation."""
    try:
        cfg = _load(config_path, task, seed, obs)
    except (ConfigError, OSError) as exc:
        _fail(str(exc))
    from .envs import make_env
    from .experts import scripted_policy
    from .learn import evaluate_policy
    from .learn.evaluate import policy_fn_from_net
    from .learn.trainer import load_checkpoint

    if policy_kind is None:
        policy_kind = "checkpoint" if checkpoint_path else "scripted"
    if policy_kind == "checkpoint":
        if not checkpoint_path:
            _fail("--policy checkpoint requires --checkpoint")
        try:
            net, _, blob = load_checkpoint(checkpoint_path, cfg, allow_digest_mismatch)
        except ValueError as exc:
            _fail(str(exc))
        policy = policy_fn_from_net(net, cfg.task)
    elif policy_kind == "scripted":
        base = scripted_policy(cfg.task)

        def policy(env, o, _base=base):
            return _base(env, o)
    else:
        adim = 6 if cfg.task == "irrigation" else 5
        rng = np.random.default_rng(cfg.seed + 999)

        def policy(env, o):
            return rng.uniform(-1.0, 1.0, adim)

    seed_base = cfg.seed * 1000 + 1
    if policy_kind == "scripted":
        # scripted experts carry per-episode state: fresh instance per episode
        stats = _eval_scripted(cfg, episodes, seed_base)
    else:
        stats = evaluate_policy(policy, lambda: make_env(cfg), episodes, seed_base)
    for key, value in stats.row().items():
        click.echo(f"{key}: {value}")


def _eval_scripted(cfg, episodes, seed_base):
    from .envs import make_env
    from .experts import scripted_policy
    from .learn import evaluate_policy

    class _PerEpisode:
        def __init__(self):
            self.pol = None
            self.env_id = None

        def __call__(self, env, obs):
            if self.env_id != id(env):
                self.pol = scripted_policy(cfg.task)
                self.env_id = id(env)
            return self.pol(env, obs)

    return evaluate_policy(_PerEpisode(), lambda: make_env(cfg), episodes, seed_base)


@main.command("record-demos")
@with_common
@click.option("--policy", "policy_kind", type=click.Choice(["scripted"]),
              default="scripted")
@click.option("--steps", type=int, default=1000, help="minimum total steps")
@click.option("--demos", "demos_path", type=click.Path(), default=None)
def record_demos(config_path, task, seed, obs, policy_kind, steps, demos_path):
    """Record whole scripted episodes until the step budget is covered."""
    try:
        cfg = _load(config_path, task, seed, obs)
    except (ConfigError, OSError) as exc:
        _fail(str(exc))
    from .envs import make_env
    from .experts import record_demo, scripted_policy, write_demo

    out_dir = demos_path or cfg.paths.demos
    os.makedirs(out_dir, exist_ok=True)
    total = 0
    episode = 0
    while total < steps:
        demo_seed = cfg.seed + 10_007 * episode
        env = make_env(cfg)
        demo = record_demo(env, scripted_policy(cfg.task), demo_seed)
        path = os.path.join(out_dir, f"{cfg.task}_{demo_seed}.demo")
        write_demo(demo, path)
        total += len(demo)
        episode += 1
        click.echo(f"episode {episode}: {len(demo)} steps -> {path} (total {total})")
    click.echo(f"recorded {episode} episodes, {total} steps")


@main.command()
@click.argument("demo_path", type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def replay(demo_path, config_path):
    """Re-run a demo's actions; verify stored rewards reproduce exactly."""
    try:
        cfg = load_config(config_path) if config_path else RunConfig()
    except (ConfigError, OSError) as exc:
        _fail(str(exc))
    from .experts import read_demo, replay_demo
    from .experts.demos import DemoError

    try:
        demo = read_demo(demo_path)
        cfg.task = demo.task
        cfg.env.obs_mode = demo.obs_mode
        report = replay_demo(demo, cfg)
    except DemoError as exc:
        _fail(str(exc))
    for i, r in enumerate(report.replayed_rewards):
        click.echo(f"step {i}: reward {r!r} stored {demo.rewards[i]!r}")
    if not report.ok:
        _fail(f"replay mismatch at steps {report.mismatches[:10]}")
    click.echo(f"replay ok: {len(demo)} steps reproduced exactly")


@main.command("render-test")
@with_common
@click.option("--out", "out_dir", type=click.Path(), default="golden")
def render_test(config_path, task, seed, obs, out_dir):
    """Dump deterministic golden frames for both tasks."""
    try:
        cfg = _load(config_path, task, seed, obs)
    except (ConfigError, OSError) as exc:
        _fail(str(exc))
    cfg.env.obs_mode = "vision"
    from .envs import make_env
    from .render import save_png

    os.makedirs(out_dir, exist_ok=True)
    tasks = [cfg.task] if task else ["irrigation", "suction"]
    for t in tasks:
        for s in range(3):
            env = make_env(cfg, t)
            ob = env.reset(cfg.seed + s)
            path = os.path.join(out_dir, f"{t}_seed{cfg.seed + s}.png")
            save_png(ob.image, path)
            click.echo(f"wrote {path}")


@main.command()
@with_common
@click.option("--port", type=int, default=8765)
@click.option("--demos", "demos_path", type=click.Path(), default=None)
def serve(config_path, task, seed, obs, port, demos_path):
    """Teleoperation WebSocket server for the browser client."""
    try:
        cfg = _load(config_path, task, seed, obs)
    except (ConfigError, OSError) as exc:
        _fail(str(exc))
    from .teleop import run_server

    run_server(cfg, cfg.task, port, demos_path or cfg.paths.demos, log=click.echo)


def _read_demo_dir(path, cfg):
    from .experts import read_demo
    from .experts.demos import DemoError

    files = sorted(glob.glob(os.path.join(path, "*.demo"))) if os.path.isdir(path) \
        else [path]
    if not files:
        _fail(f"no .demo files under {path}")
    demos = []
    for f in files:
        try:
            demos.append(read_demo(f, expect_digest=cfg.digest()))
        except DemoError as exc:
            _fail(f"{f}: {exc}")
    return demos


if __name__ == "__main__":
    main()
