"""
tandem - desk-scale post-training harness for tool-using dialogue agents.
Command-line entry point.

    python tandem.py eval --domain assets/toy_domain.json --tasks assets/tasks/toy \
        --agent scripted:assets/scripts/toy_agent_solver.json --n-trials 4 --k 4
"""

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from arena.domain import Domain
from arena.environment import Environment
from arena.task import TaskSpec, load_tasks
from arena.types import Role
from bench.runner import run_benchmark
from grpo.export import save_params, write_curve_csv
from grpo.train import train_toy
from policy.base import Policy
from policy.remote import ChatClient, RemotePolicy
from policy.scripted import ScriptedPolicy
from policy.toy import ToyPolicy, ToyPolicyParams, toy_vocabulary
from rollout.engine import sample_group, run_episode
from rollout.sft import concat_sft, export_sft, write_sft
from rollout.store import TrajectoryWriter, load_trajectories
from synth.backends import Backend, LiveBackend
from synth.mock import MockBackend
from synth.runner import run_synthesis
from system.config import GrpoConfig, Settings, load_settings
from system.errors import ConfigError, TandemError
from system.logs import get_logger, kv, setup_logging
from system.seeding import derive_seed
from system.storage import JsonlWriter, write_json
from system.workers import WorkerPool
from verifier.core import Verifier

ROOT = Path(__file__).resolve().parent
ASSETS = ROOT / "assets"
DEFAULT_DOMAIN = ASSETS / "toy_domain.json"
DEFAULT_TASKS = ASSETS / "tasks" / "toy"
DEFAULT_AGENT = f"scripted:{ASSETS / 'scripts' / 'toy_agent_solver.json'}"
DEFAULT_USER = f"scripted:{ASSETS / 'scripts' / 'toy_user.json'}"

logger = get_logger("tandem")


# --- shared builders ---

def build_policy(spec: str, role: Role, settings: Settings, domain: Domain) -> Policy:
    """Policy from ``scripted:<path>``, ``toy[:<params.npz>]`` or ``remote:<base url>``."""
    kind, _, arg = spec.partition(":")
    if kind == "scripted":
        if not arg:
            raise ConfigError("scripted policy needs a script path, e.g. scripted:script.json")
        return ScriptedPolicy.load(arg, role=role)
    if kind == "toy":
        if role is not Role.AGENT:
            raise ConfigError("the toy policy can only play the agent")
        params = ToyPolicyParams.load(arg) if arg else ToyPolicyParams.zeros(toy_vocabulary(domain.registry.names))
        return ToyPolicy(params)
    if kind == "remote":
        remote = dataclasses.replace(settings.remote, base_url=arg or settings.remote.base_url)
        if not remote.base_url:
            raise ConfigError("remote policy needs a base url, e.g. remote:http://localhost:8000/v1")
        return RemotePolicy(role, ChatClient(remote))
    raise ConfigError(f"unknown policy {spec!r}, expected scripted:<path>, toy[:<params>] or remote:<url>")


def build_backend(spec: str, settings: Settings, seed: int) -> Backend:
    kind, _, arg = spec.partition(":")
    if kind == "mock":
        return MockBackend(seed=seed)
    if kind == "remote":
        remote = dataclasses.replace(settings.remote, base_url=arg or settings.remote.base_url)
        if not remote.base_url:
            raise ConfigError("remote backend needs a base url")
        return LiveBackend(ChatClient(remote))
    raise ConfigError(f"unknown backend {spec!r}, expected mock or remote:<url>")


def load_suite(args) -> Tuple[Environment, List[TaskSpec]]:
    domain = Domain.load(args.domain)
    tasks = load_tasks(args.tasks)
    if not tasks:
        raise ConfigError(f"no task files in {args.tasks}")
    return Environment(domain), tasks


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- verbs ---

def cmd_synth(args, settings: Settings) -> int:
    overrides = {k: v for k, v in (("k_sets", args.k_sets), ("n_target", args.n_target),
                                   ("seed", args.seed)) if v is not None}
    config = dataclasses.replace(settings.synth, **overrides)
    env = Environment(Domain.load(args.domain))
    backend = build_backend(args.backend, settings, config.seed)
    with WorkerPool(config.worker_cap) as pool:
        result = run_synthesis(env, backend, config, pool=pool, progress=not args.quiet)
    out = result.save(_out_dir(args))
    print(f"{len(result.instances)} instances written to {out}")
    return 0


def cmd_rollout(args, settings: Settings) -> int:
    env, tasks = load_suite(args)
    agent = build_policy(args.agent, Role.AGENT, settings, env.domain)
    user = build_policy(args.user, Role.USER, settings, env.domain)
    verifier = Verifier(env.domain)
    verifier.prepare(env, tasks)
    max_turns = settings.rollout.max_turns
    seed = settings.grpo.seed if args.seed is None else args.seed
    path = _out_dir(args) / "trajectories.jsonl"
    rewards: List[float] = []
    with WorkerPool(settings.rollout.worker_cap) as pool, TrajectoryWriter(path, truncate=True) as writer:
        for task in tasks:
            base_seed = derive_seed(seed, "rollout", task.id)
            if args.group_size > 1:
                group = sample_group(env, task, args.group_size, agent, user, base_seed, max_turns,
                                     reward_fn=verifier.reward_fn(verifier.spec_for(task.id)), pool=pool)
                trajectories = group.trajectories
            else:
                trajectory = run_episode(env, task, agent, user, max_turns, base_seed)
                trajectory.reward = verifier.reward(trajectory) if trajectory.error is None else 0.0
                trajectories = [trajectory]
            writer.write_trajectories(trajectories)
            rewards.extend(t.reward or 0.0 for t in trajectories)
    print(f"{len(rewards)} episodes, mean reward {sum(rewards) / len(rewards):.3f}, written to {path}")
    return 0


def cmd_verify(args, settings: Settings) -> int:
    env, tasks = load_suite(args)
    verifier = Verifier(env.domain)
    verifier.prepare(env, tasks)
    trajectories = load_trajectories(args.trajectories)
    path = _out_dir(args) / "verified.jsonl"
    passed = 0
    with JsonlWriter(path, truncate=True) as writer:
        for trajectory in trajectories:
            report = verifier.verify(trajectory)
            passed += int(report.overall_pass)
            writer.write({"task_id": trajectory.task_id, "seed": trajectory.seed, **report.to_dict()})
    print(f"{passed}/{len(trajectories)} trajectories pass, reports written to {path}")
    return 0


def cmd_train_toy(args, settings: Settings) -> int:
    env, tasks = load_suite(args)
    overrides = {k: v for k, v in (("iterations", args.iterations), ("seed", args.seed),
                                   ("learning_rate", args.lr)) if v is not None}
    if args.no_filter:
        overrides["dynamic_filter"] = False
    if args.preset:
        base = {f.name: getattr(settings.grpo, f.name) for f in dataclasses.fields(GrpoConfig)}
        base.update(overrides)
        base.pop("prompts_per_batch")
        base.pop("group_size")
        config = GrpoConfig.from_preset(args.preset, **base)
    else:
        config = dataclasses.replace(settings.grpo, **overrides)
    policy = ToyPolicy(ToyPolicyParams.zeros(toy_vocabulary(env.domain.registry.names)))
    user = build_policy(args.user, Role.USER, settings, env.domain)
    verifier = Verifier(env.domain)
    verifier.prepare(env, tasks)
    out = _out_dir(args)
    with WorkerPool(config.worker_cap) as pool, JsonlWriter(out / "signal.jsonl", truncate=True) as signal:
        curve = train_toy(env, tasks, policy, user, config, verifier, pool=pool, signal_writer=signal,
                          progress=not args.quiet)
    write_curve_csv(out / "curve.csv", curve)
    save_params(out / "params.npz", policy.params)
    write_json(out / "train.json", {"config": dataclasses.asdict(config), "auc": curve.auc(),
                                    "tail_mean": curve.tail_mean(), "skipped": curve.skipped})
    print(f"final mean reward {curve.tail_mean():.3f} over the last 10 iterations, outputs in {out}")
    return 0


def cmd_eval(args, settings: Settings) -> int:
    env, tasks = load_suite(args)
    bench = settings.bench
    n_trials = args.n_trials or bench.n_trials
    ks = list(range(1, args.k + 1)) if args.k else list(bench.ks)
    estimator = args.estimator or bench.estimator
    seed = 0 if args.seed is None else args.seed
    agent = build_policy(args.agent, Role.AGENT, settings, env.domain)
    user = build_policy(args.user, Role.USER, settings, env.domain)
    out = _out_dir(args)
    with WorkerPool(bench.worker_cap) as pool, TrajectoryWriter(out / "trajectories.jsonl", truncate=True) as writer:
        matrix, report = run_benchmark(env, tasks, agent, user, n_trials, seed, ks=ks, estimator=estimator,
                                       max_turns=bench.max_turns, pool=pool, writer=writer,
                                       label=args.label, progress=not args.quiet)
    report.save(out)
    write_json(out / "trials.json", matrix.to_dict())
    print(report.table(), end="")
    return 0


def cmd_export_sft(args, settings: Settings) -> int:
    trajectories = load_trajectories(args.trajectories)
    if args.min_reward is not None:
        trajectories = [t for t in trajectories if (t.reward or 0.0) >= args.min_reward]
    records = export_sft(trajectories, Role(args.side), args.format)
    count = write_sft(args.out, records)
    print(f"{count} records written to {args.out}")
    return 0


def cmd_concat(args, settings: Settings) -> int:
    sources = {}
    for item in args.source:
        domain, sep, path = item.partition("=")
        if not sep or not domain or not path:
            raise ConfigError(f"--source expects domain=path, got {item!r}")
        sources[domain] = path
    count = concat_sft(sources, args.out, seed=args.seed or 0)
    print(f"{count} records written to {args.out}")
    return 0


# --- parser ---

def _suite_args(parser: argparse.ArgumentParser):
    parser.add_argument("--domain", default=str(DEFAULT_DOMAIN), help="domain fixture JSON")
    parser.add_argument("--tasks", default=str(DEFAULT_TASKS), help="directory of task JSON files")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tandem", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", help="YAML settings file")
    parser.add_argument("--log-level", default="INFO", help="logging level (default INFO)")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="no progress bars")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="three-phase synthetic task generation")
    p.add_argument("--domain", default=str(DEFAULT_DOMAIN))
    p.add_argument("--backend", default="mock", help="mock or remote:<base url>")
    p.add_argument("--k-sets", type=int)
    p.add_argument("--n-target", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="archive directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("rollout", help="sample episodes and score them")
    _suite_args(p)
    p.add_argument("--agent", default=DEFAULT_AGENT)
    p.add_argument("--user", default=DEFAULT_USER)
    p.add_argument("--group-size", type=int, default=1, help="episodes per task")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("verify", help="run task checkers over a trajectory file")
    _suite_args(p)
    p.add_argument("--trajectories", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("train-toy", help="GRPO on the toy policy")
    _suite_args(p)
    p.add_argument("--user", default=DEFAULT_USER)
    p.add_argument("--preset", help="batch preset such as 8x32")
    p.add_argument("--iterations", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--no-filter", action="store_true", help="disable dynamic filtering")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("eval", help="pass^k / pass@k benchmark")
    _suite_args(p)
    p.add_argument("--agent", default=DEFAULT_AGENT)
    p.add_argument("--user", default=DEFAULT_USER)
    p.add_argument("--n-trials", type=int)
    p.add_argument("--k", type=int, help="report p^1..p^k and p@k")
    p.add_argument("--estimator", choices=("unbiased", "partition"))
    p.add_argument("--label")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-sft", help="supervised records from trajectories")
    p.add_argument("--trajectories", required=True)
    p.add_argument("--side", choices=("agent", "user"), default="agent")
    p.add_argument("--format", choices=("chat", "text"), default="chat")
    p.add_argument("--min-reward", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_sft)

    p = sub.add_parser("concat", help="merge SFT files across domains")
    p.add_argument("--source", action="append", required=True, help="domain=path, repeatable")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_concat)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging("DEBUG" if args.verbose else args.log_level)
    try:
        settings = load_settings(args.config)
        return args.func(args, settings)
    except (ConfigError, FileNotFoundError) as e:
        logger.error("configuration error: %s", e)
        return 2
    except TandemError as e:
        logger.error("%s failed: %s %s", args.command, e, kv(error=type(e).__name__))
        return 1


if __name__ == "__main__":
    sys.exit(main())
