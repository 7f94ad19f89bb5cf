"""Command-line entry points.

Subcommands: gen, stats, train, eval, compare, grad-check, serve, and
env-stdio (the reference counterparty for the environment wire protocol).
Exit codes: 0 success, 1 usage error, 2 runtime failure. Every flag can
also be supplied through a FRAMEPICK_<FLAG> environment variable.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from .errors import FramepickError

USAGE_EXIT = 1
RUNTIME_EXIT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(USAGE_EXIT)


def _env_default(flag: str, fallback=None):
    return os.environ.get("FRAMEPICK_" + flag.upper().replace("-", "_"), fallback)


def _add_flag(parser, flag: str, **kwargs):
    """Add --flag with a FRAMEPICK_FLAG environment override as default."""
    env_value = _env_default(flag)
    if env_value is not None:
        cast = kwargs.get("type", str)
        if kwargs.get("action") in ("store_true", "store_false"):
            kwargs["default"] = env_value.lower() in ("1", "true", "yes")
        else:
            kwargs["default"] = cast(env_value)
        kwargs.pop("required", None)
    parser.add_argument(f"--{flag}", **kwargs)


def build_parser() -> _Parser:
    parser = _Parser(prog="framepick", description=__doc__)
    parser.add_argument("--version", action="version", version=f"framepick {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an episode suite file")
    _add_flag(p, "n", type=int, default=50, help="number of episodes")
    _add_flag(p, "seed", type=int, default=0)
    _add_flag(p, "out", required=True, help="output suite path (JSON array)")
    _add_flag(p, "preset", choices=["benchmark", "micro"], default="benchmark")
    _add_flag(p, "n-frames-min", type=int, default=None)
    _add_flag(p, "n-frames-max", type=int, default=None)
    _add_flag(p, "horizon", type=int, default=None)
    _add_flag(p, "segments-min", type=int, default=None)
    _add_flag(p, "segments-max", type=int, default=None)
    _add_flag(p, "target-pcc", type=float, default=None,
              help="calibrate Wild noise to this PCC (0 disables)")
    _add_flag(p, "sigma-obs", type=float, default=None,
              help="fixed Wild noise sigma (skips calibration)")
    p.add_argument("--no-transition-noise", action="store_true")

    p = sub.add_parser("stats", help="precompute per-horizon random-policy stats")
    _add_flag(p, "suite", required=True)
    _add_flag(p, "cache", required=True, help="stats cache file")
    _add_flag(p, "horizon", type=int, default=5, help="compute stats for horizons 1..H")
    _add_flag(p, "runs", type=int, default=30)

    p = sub.add_parser("train", help="train the recommendation agent")
    _add_flag(p, "suite", required=True)
    _add_flag(p, "out", required=True, help="checkpoint output path")
    _add_flag(p, "preset", choices=["desk", "paper"], default="desk")
    _add_flag(p, "episodes", type=int, default=None)
    _add_flag(p, "lr", type=float, default=None)
    _add_flag(p, "batch-size", type=int, default=None)
    _add_flag(p, "seed", type=int, default=None)
    _add_flag(p, "t-train", type=int, default=None)
    _add_flag(p, "subseq-len", type=int, default=None)
    _add_flag(p, "variant", choices=["naive", "final"], default=None)
    _add_flag(p, "reward-components", choices=["both", "goal", "aux"], default=None)
    _add_flag(p, "workers", type=int, default=None)
    _add_flag(p, "log", default=None, help="training log path (JSON lines)")
    _add_flag(p, "stats-cache", default=None)
    _add_flag(p, "figures", default=None, help="directory for training curve figures")
    p.add_argument("--no-task-decomposition", action="store_true")
    p.add_argument("--no-quality-state", action="store_true")
    p.add_argument("--no-history-state", action="store_true")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("eval", help="evaluate a checkpoint against all baselines")
    _add_flag(p, "suite", required=True)
    _add_flag(p, "checkpoint", required=True)
    _add_flag(p, "out", required=True, help="output directory")
    _add_flag(p, "mode", choices=["oracle", "wild"], default="wild")
    _add_flag(p, "rounds", type=int, default=8)
    _add_flag(p, "random-repeats", type=int, default=5)
    _add_flag(p, "seed", type=int, default=0)

    p = sub.add_parser("compare", help="compare an arbitrary set of policies")
    _add_flag(p, "suite", required=True)
    _add_flag(p, "policies", default="random,linspace,worst-oracle,worst-wild",
              help="comma list: random,linspace,worst-oracle,worst-wild,agent")
    _add_flag(p, "checkpoint", default=None, help="required when agent is requested")
    _add_flag(p, "out", required=True, help="output directory")
    _add_flag(p, "mode", choices=["oracle", "wild"], default="wild")
    _add_flag(p, "rounds", type=int, default=8)
    _add_flag(p, "random-repeats", type=int, default=5)
    _add_flag(p, "seed", type=int, default=0)

    p = sub.add_parser("grad-check", help="verify analytic gradients by finite differences")
    _add_flag(p, "draws", type=int, default=100)
    _add_flag(p, "step", type=float, default=1e-5)
    _add_flag(p, "tolerance", type=float, default=1e-4)
    _add_flag(p, "seed", type=int, default=0)

    p = sub.add_parser("serve", help="start the human-play HTTP service")
    _add_flag(p, "suite", required=True)
    _add_flag(p, "checkpoint", default=None)
    _add_flag(p, "host", default="127.0.0.1")
    _add_flag(p, "port", type=int, default=8421)
    _add_flag(p, "session-log", default=None)
    _add_flag(p, "static-dir", default=None, help="directory with the web console build")

    sub.add_parser("env-stdio", help="serve the simulator over stdin/stdout")
    return parser


def _build_policies(names: list[str], horizon: int, checkpoint: str | None, seed: int):
    from .policies import AgentPolicy, LinspacePolicy, RandomPolicy, WorstPolicy
    from .qnet import load_params
    from .simenv import ObservationMode

    policies = []
    for name in names:
        if name == "random":
            policies.append(RandomPolicy(seed))
        elif name == "linspace":
            policies.append(LinspacePolicy(horizon))
        elif name == "worst-oracle":
            policies.append(WorstPolicy(ObservationMode.ORACLE))
        elif name == "worst-wild":
            policies.append(WorstPolicy(ObservationMode.WILD))
        elif name == "agent":
            if not checkpoint:
                raise UsageFailure("policy 'agent' requires --checkpoint")
            policies.append(AgentPolicy(load_params(checkpoint)))
        else:
            raise UsageFailure(f"unknown policy {name!r}")
    return policies


class UsageFailure(Exception):
    pass


def _cmd_gen(args) -> int:
    from .suite import MICRO_SPEC, GeneratorSpec, dump_suite, generate_suite

    base = MICRO_SPEC if args.preset == "micro" else GeneratorSpec()
    fields = dict(base.__dict__)
    fields["n_episodes"] = args.n
    fields["seed"] = args.seed
    for flag, key in [
        ("n_frames_min", "n_frames_min"),
        ("n_frames_max", "n_frames_max"),
        ("horizon", "horizon"),
        ("segments_min", "segments_min"),
        ("segments_max", "segments_max"),
    ]:
        value = getattr(args, flag)
        if value is not None:
            fields[key] = value
    if args.target_pcc is not None:
        fields["target_pcc"] = args.target_pcc if args.target_pcc > 0 else None
    if args.sigma_obs is not None:
        fields["target_pcc"] = None
        fields["obs_noise_sigma"] = args.sigma_obs
    if args.no_transition_noise:
        fields["transition_noise"] = False
    configs = generate_suite(GeneratorSpec(**fields))
    dump_suite(configs, args.out)
    print(f"wrote {len(configs)} episodes to {args.out}")
    return 0


def _cmd_stats(args) -> int:
    from .rewards import StatsCache
    from .suite import load_suite
    from .util import derive_seed

    configs = load_suite(args.suite)
    cache = StatsCache(args.cache)
    for i, config in enumerate(configs):
        cache.stats_for(
            config,
            range(1, args.horizon + 1),
            n_runs=args.runs,
            seed=derive_seed(config.seed, 10),
        )
        print(f"episode {i}: horizons 1..{args.horizon} cached")
    return 0


def _cmd_train(args) -> int:
    from .qnet import save_params
    from .rewards import StatsCache
    from .suite import load_suite
    from .trainer import TrainConfig, train

    overrides = {}
    for flag in ("episodes", "lr", "batch_size", "seed", "t_train", "subseq_len",
                 "variant", "reward_components", "workers"):
        value = getattr(args, flag)
        if value is not None:
            overrides[flag] = value
    if args.no_task_decomposition:
        overrides["task_decomposition"] = False
    if args.no_quality_state:
        overrides["use_quality"] = False
    if args.no_history_state:
        overrides["use_history"] = False
    if args.log:
        overrides["log_path"] = args.log
    factory = TrainConfig.desk if args.preset == "desk" else TrainConfig.paper
    cfg = factory(**overrides)
    suite = load_suite(args.suite)
    cache = StatsCache(args.stats_cache) if args.stats_cache else None
    progress = None if args.quiet else lambda msg: print(msg, file=sys.stderr)
    params, log = train(cfg, suite, stats_cache=cache, progress=progress)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_params(params, args.out)
    print(f"checkpoint written to {args.out}")
    if args.figures:
        from .figures import render_training_figures

        for path in render_training_figures(log, args.figures):
            print(f"figure written to {path}")
    return 0


def _run_comparison(args, policy_names: list[str], checkpoint: str | None) -> int:
    from .evaluate import compare, emit_report
    from .figures import render_report_figures
    from .simenv import ObservationMode
    from .suite import load_suite, suite_hash

    configs = load_suite(args.suite)
    policies = _build_policies(policy_names, args.rounds, checkpoint, args.seed)
    report = compare(
        configs,
        policies,
        t_rounds=args.rounds,
        random_repeats=args.random_repeats,
        seed=args.seed,
        mode=ObservationMode(args.mode),
    )
    report.suite_hash = suite_hash(args.suite)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    emit_report(report, "csv", outdir / "report.csv")
    emit_report(report, "json", outdir / "report.json")
    figures = render_report_figures(report, outdir)
    for name, summary in sorted(report.policies.items()):
        std = f" +- {summary.std_auc:.4f}" if summary.std_auc is not None else ""
        print(f"{name:>14}: AUC {summary.mean_auc:.4f}{std}")
    for path in [outdir / "report.csv", outdir / "report.json", *figures]:
        print(f"wrote {path}")
    return 0


def _cmd_eval(args) -> int:
    names = ["agent", "random", "linspace", "worst-oracle", "worst-wild"]
    return _run_comparison(args, names, args.checkpoint)


def _cmd_compare(args) -> int:
    names = [n.strip() for n in args.policies.split(",") if n.strip()]
    if not names:
        raise UsageFailure("no policies requested")
    return _run_comparison(args, names, args.checkpoint)


def _cmd_grad_check(args) -> int:
    from .qnet import gradient_check

    worst = gradient_check(draws=args.draws, fd_step=args.step, seed=args.seed)
    print(f"max relative gradient error over {args.draws} draws: {worst:.3e}")
    if worst > args.tolerance:
        print(f"FAIL: exceeds tolerance {args.tolerance:.1e}", file=sys.stderr)
        return RUNTIME_EXIT
    print(f"OK: within tolerance {args.tolerance:.1e}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .qnet import load_params
    from .service import create_app
    from .suite import load_suite, suite_hash

    configs = load_suite(args.suite)
    params = load_params(args.checkpoint) if args.checkpoint else None
    app = create_app(
        configs,
        suite_hash(args.suite),
        agent_params=params,
        session_log=args.session_log,
        static_dir=args.static_dir,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _cmd_env_stdio(_args) -> int:
    from .protocol import serve_env

    serve_env(sys.stdin.buffer, sys.stdout.buffer)
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "stats": _cmd_stats,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "compare": _cmd_compare,
    "grad-check": _cmd_grad_check,
    "serve": _cmd_serve,
    "env-stdio": _cmd_env_stdio,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except UsageFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except FramepickError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
