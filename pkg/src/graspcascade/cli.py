"""Experiment lifecycle entry points.

Subcommands: record-demos (scripted oracle), validate-demos, replay, train
(cascade / gail_only / rl_only), eval, plot, teleop. Every run directory is
self-describing: the resolved config, seeds and input-file hashes are
written next to the outputs.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .configio import dump_yaml, load_versioned_yaml, preset_path, sha256_file
from .environment import GraspEnv, load_scene
from .errors import ConfigError, DataError, NumericError
from .kinematics import load_chain
from .rewards import RewardConfig, load_reward_config
from .tasks import TaskId

EXPERIMENT_FORMAT_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _resolve(path_or_preset, default_preset):
    if path_or_preset is None:
        return preset_path(default_preset)
    p = Path(path_or_preset)
    return p if p.exists() else preset_path(str(path_or_preset))


def build_env(scene=None, chain=None):
    scene_path = _resolve(scene, "scene_cup_default.yaml")
    chain_path = _resolve(chain, "chain_generic6r.yaml")
    env = GraspEnv(load_chain(chain_path), load_scene(scene_path))
    return env, scene_path, chain_path


# ----------------------------------------------------------------- train


def _trainer_config(args, doc: dict):
    from .learning.cascade import CascadeConfig
    from .learning.gail import GailConfig
    from .learning.ppo import PPOConfig
    from .learning.trainer import TrainerConfig

    t = doc.get("trainer", {})
    def pick(key, default):
        return t.get(key, default)
    cfg = TrainerConfig(
        mode=args.mode or doc.get("mode", "cascade"),
        seed=args.seed if args.seed is not None else doc.get("seed", 0),
        max_env_steps=args.max_steps if args.max_steps is not None
        else pick("max_env_steps", 300_000),
        rollout_steps=pick("rollout_steps", 1024),
        hidden_size=pick("hidden_size", 64),
        num_layers=pick("num_layers", 1),
        gamma=pick("gamma", 0.99),
        lam=pick("lambda", 0.95),
        ppo=PPOConfig(**pick("ppo", {})),
        gail=GailConfig(**pick("gail", {})),
        cascade=CascadeConfig(**pick("cascade", {})),
        eval_every=pick("eval_every", 0),
        eval_episodes=pick("eval_episodes", 20),
        checkpoint_every=pick("checkpoint_every", 50),
    )
    return cfg


def cmd_train(args) -> int:
    from .demonstrations import load as load_demos
    from .learning.trainer import Trainer

    doc = {}
    if args.config:
        doc = load_versioned_yaml(args.config, EXPERIMENT_FORMAT_VERSION,
                                  "experiment")
    env, scene_path, chain_path = build_env(
        args.scene or doc.get("scene"), args.chain or doc.get("chain"))
    scene_hash = sha256_file(scene_path)
    chain_hash = sha256_file(chain_path)
    reward_path = _resolve(args.rewards or doc.get("rewards"),
                           "rewards_default.yaml")
    reward_config = load_reward_config(reward_path)
    cfg = _trainer_config(args, doc)

    demos = None
    demo_path = args.demos or doc.get("demos")
    if cfg.mode in ("cascade", "gail_only"):
        if not demo_path:
            raise ConfigError(f"mode {cfg.mode} requires --demos")
        demos = load_demos(demo_path, scene_hash, chain_hash)

    out = Path(args.out or doc.get("out", "runs/latest"))
    out.mkdir(parents=True, exist_ok=True)
    dump_yaml(out / "experiment.yaml", {
        "format_version": EXPERIMENT_FORMAT_VERSION,
        "mode": cfg.mode,
        "seed": cfg.seed,
        "scene": str(scene_path), "scene_hash": scene_hash,
        "chain": str(chain_path), "chain_hash": chain_hash,
        "rewards": str(reward_path), "rewards_hash": sha256_file(reward_path),
        "demos": str(demo_path) if demo_path else None,
        "trainer": dataclasses.asdict(cfg),
    })
    if args.workers and args.workers > 1:
        print(f"note: this build collects rollouts in-process; "
              f"--workers {args.workers} runs as 1", file=sys.stderr)

    if cfg.max_env_steps == 0:
        (out / "metrics.jsonl").touch()
        print(f"0 steps requested; wrote empty metrics log to {out}")
        return EXIT_OK

    trainer = Trainer(env, demos, cfg, reward_config, out,
                      scene_hash=scene_hash, chain_hash=chain_hash)
    if args.resume:
        trainer.load_checkpoint(Path(args.resume))
    summary = trainer.run(progress=not args.quiet)
    print(json.dumps(summary["final_eval"], indent=2))
    return EXIT_OK


# ----------------------------------------------------------------- eval


def cmd_eval(args) -> int:
    from .learning.trainer import evaluate_policy, load_policies_for_eval

    env, scene_path, chain_path = build_env(args.scene, args.chain)
    nets = load_policies_for_eval(args.checkpoint, env,
                                  scene_hash=sha256_file(scene_path),
                                  chain_hash=sha256_file(chain_path))
    if args.episodes == 0:
        report = {"episodes": 0}
    else:
        report = evaluate_policy(env, nets, args.episodes, args.seed)
    text = json.dumps(report, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text)
    return EXIT_OK


def cmd_eval_scripted(args) -> int:
    """Evaluate the scripted oracle controller (sanity anchor)."""
    from .scripted import ScriptedGraspController

    env, _, _ = build_env(args.scene, args.chain)
    ctrl = ScriptedGraspController(env)

    class _Oracle:
        def initial_hidden(self):
            return None

        def step(self, obs, hidden, deterministic=True):
            raise NotImplementedError

    rng = np.random.default_rng(args.seed)
    from .environment import TerminalCause
    wins = 0
    lengths = []
    for _ in range(args.episodes):
        state = env.reset(rng)
        steps = 0
        while True:
            out = env.step(state, ctrl.act(env, state))
            state = out.state
            steps += 1
            if out.terminal is not None:
                wins += out.terminal is TerminalCause.SUCCESS
                lengths.append(steps)
                break
    report = {"episodes": args.episodes,
              "task3_success_rate": wins / max(1, args.episodes),
              "mean_episode_length": float(np.mean(lengths)) if lengths else 0.0}
    print(json.dumps(report, indent=2))
    return EXIT_OK


# ----------------------------------------------------------------- demos


def cmd_record_demos(args) -> int:
    from .demonstrations import save
    from .scripted import record_scripted_demos

    env, scene_path, chain_path = build_env(args.scene, args.chain)
    demos = record_scripted_demos(env, args.episodes, args.seed,
                                  sha256_file(scene_path),
                                  sha256_file(chain_path),
                                  pace=args.pace, noise=args.noise)
    save(demos, args.out)
    lengths = [len(e) for e in demos.episodes]
    print(f"recorded {len(demos)} episodes "
          f"(mean length {np.mean(lengths):.0f}) to {args.out}")
    return EXIT_OK


def cmd_validate_demos(args) -> int:
    from .demonstrations import load as load_demos

    scene_hash = chain_hash = None
    if args.scene or args.chain:
        _, scene_path, chain_path = build_env(args.scene, args.chain)
        scene_hash = sha256_file(scene_path)
        chain_hash = sha256_file(chain_path)
    demos = load_demos(args.path, scene_hash, chain_hash)
    lengths = [len(e) for e in demos.episodes]
    print(json.dumps({
        "episodes": len(demos),
        "steps": int(np.sum(lengths)),
        "mean_length": float(np.mean(lengths)),
        "recorder": demos.metadata.recorder,
        "valid": True,
    }, indent=2))
    return EXIT_OK


def cmd_replay(args) -> int:
    from .demonstrations import load as load_demos, replay

    env, scene_path, chain_path = build_env(args.scene, args.chain)
    demos = load_demos(args.path, sha256_file(scene_path),
                       sha256_file(chain_path))
    mismatches = 0
    for idx, ep in enumerate(demos.episodes):
        observations, terminal = replay(env, ep)
        ok = terminal is ep.terminal and len(observations) == len(ep.steps)
        if ok:
            for t in range(1, len(ep.steps)):
                if not np.array_equal(observations[t - 1],
                                      ep.steps[t].observation):
                    ok = False
                    break
        if not ok:
            mismatches += 1
            print(f"episode {idx}: replay diverged", file=sys.stderr)
    print(f"replayed {len(demos)} episodes, {mismatches} mismatches")
    return EXIT_OK if mismatches == 0 else EXIT_DATA


# ----------------------------------------------------------------- plot


def cmd_plot(args) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(args.metrics)
    if not path.exists():
        raise DataError(f"metrics log not found: {path}")
    rows = []
    warnings = 0
    for line_no, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError:
            warnings += 1
            print(f"warning: skipping corrupt line {line_no}", file=sys.stderr)
            continue
        if "env_steps" in rec and "mean_return" in rec:
            rows.append(rec)

    bins: dict = {}
    for r in rows:
        b = int(r["env_steps"]) // args.bin_steps
        bins.setdefault(b, []).append(r)
    xs = sorted(bins)
    steps_axis = [(b + 1) * args.bin_steps for b in xs]
    mean_return = [float(np.mean([r["mean_return"] for r in bins[b]])) for b in xs]
    mean_len = [float(np.mean([r["mean_episode_length"] for r in bins[b]]))
                for b in xs]

    out_dir = Path(args.out or path.parent)
    out_dir.mkdir(parents=True, exist_ok=True)
    made = []
    for name, ys, label in (("reward_per_episode.png", mean_return,
                             "average cumulative reward per episode"),
                            ("steps_per_episode.png", mean_len,
                             "average steps per episode")):
        fig, ax = plt.subplots(figsize=(7, 4))
        if xs:
            ax.plot(steps_axis, ys, marker="o", ms=3)
        ax.set_xlabel(f"environment steps (binned per {args.bin_steps})")
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(out_dir / name, dpi=120)
        plt.close(fig)
        made.append(str(out_dir / name))
    print(json.dumps({"plots": made, "points": len(xs), "warnings": warnings}))
    return EXIT_OK


# ----------------------------------------------------------------- teleop


def cmd_teleop(args) -> int:
    from .teleop import serve

    serve(port=args.port, scene=args.scene, chain=args.chain,
          tick_hz=args.tick_hz, demo_out=args.demo_out)
    return EXIT_OK


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="graspcascade",
        description="Task-divided 6-DOF grasp learning: demonstrations, "
                    "adversarial imitation, staged RL, whole-motion "
                    "optimization.")
    sub = p.add_subparsers(dest="command", required=True)

    def common_env(sp):
        sp.add_argument("--scene", help="scene YAML path or preset name")
        sp.add_argument("--chain", help="chain YAML path or preset name")

    t = sub.add_parser("train", help="run a training experiment")
    t.add_argument("--config", help="experiment YAML")
    t.add_argument("--mode", choices=("cascade", "gail_only", "rl_only"))
    t.add_argument("--seed", type=int)
    t.add_argument("--max-steps", type=int, dest="max_steps")
    t.add_argument("--workers", type=int, default=1)
    t.add_argument("--demos", help="demonstration file")
    t.add_argument("--rewards", help="reward config YAML")
    t.add_argument("--out", help="run directory")
    t.add_argument("--resume", help="checkpoint to resume from")
    t.add_argument("--quiet", action="store_true")
    common_env(t)
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("checkpoint")
    e.add_argument("--episodes", type=int, default=100)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", help="write the report JSON here")
    common_env(e)
    e.set_defaults(fn=cmd_eval)

    eo = sub.add_parser("eval-scripted", help="evaluate the scripted oracle")
    eo.add_argument("--episodes", type=int, default=100)
    eo.add_argument("--seed", type=int, default=0)
    common_env(eo)
    eo.set_defaults(fn=cmd_eval_scripted)

    r = sub.add_parser("record-demos", help="record scripted demonstrations")
    r.add_argument("--episodes", type=int, default=50)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--pace", type=float, default=0.28)
    r.add_argument("--noise", type=float, default=0.02)
    r.add_argument("--out", required=True)
    common_env(r)
    r.set_defaults(fn=cmd_record_demos)

    v = sub.add_parser("validate-demos", help="validate a demonstration file")
    v.add_argument("path")
    common_env(v)
    v.set_defaults(fn=cmd_validate_demos)

    rp = sub.add_parser("replay", help="replay demonstrations, checking drift")
    rp.add_argument("path")
    common_env(rp)
    rp.set_defaults(fn=cmd_replay)

    pl = sub.add_parser("plot", help="plot metric curves from a run")
    pl.add_argument("metrics", help="metrics.jsonl path")
    pl.add_argument("--out", help="output directory (default: alongside)")
    pl.add_argument("--bin-steps", type=int, default=20_000, dest="bin_steps")
    pl.set_defaults(fn=cmd_plot)

    tp = sub.add_parser("teleop", help="serve the browser teleoperation UI")
    tp.add_argument("--port", type=int, default=8750)
    tp.add_argument("--tick-hz", type=float, default=30.0, dest="tick_hz")
    tp.add_argument("--demo-out", default="teleop_demos.jsonl", dest="demo_out")
    common_env(tp)
    tp.set_defaults(fn=cmd_teleop)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
