"""Command-line harness.

Subcommands: run (seeded trial batches), sweep (tree-capacity sweep),
gen-env (write a benchmark scene), bench-backends (compare the compiled and
pure-Python kernels). Exit codes: 0 trials completed, 1 usage/config error,
2 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .backend import available_backends
from .bench import PLANNERS, run_trials, sweep_te
from .core import (EnvironmentIOError, KinopaxError, PlannerConfig,
                   load_environment)
from .dynamics import get_model, model_names
from .envgen import ENV_KINDS, gen_environment


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_planning_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--env", required=True, help="environment JSON file")
    p.add_argument("--model", required=True, choices=model_names())
    p.add_argument("--te", type=int, default=None,
                   help="tree capacity (default per model)")
    p.add_argument("--lambda-max", type=int, default=32)
    p.add_argument("--tprop", type=float, default=None,
                   help="max propagation duration in seconds (default per model)")
    p.add_argument("--epsilon", type=float, default=0.005)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--cells", type=int, default=None,
                   help="grid cells per state dimension (default per model)")
    p.add_argument("--subcells", type=int, default=4)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-time", type=float, default=60.0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--check-res", type=float, default=0.05)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--backend", choices=available_backends(), default=None)


def _config_from_args(args, model) -> PlannerConfig:
    return PlannerConfig(
        t_e=args.te if args.te is not None else model.default_t_e,
        lambda_max=args.lambda_max,
        t_prop=args.tprop if args.tprop is not None else model.default_t_prop,
        epsilon=args.epsilon,
        delta=args.delta,
        cells_per_dim=args.cells if args.cells is not None else model.default_cells_per_dim,
        subcells_per_dim=args.subcells,
        t_max=args.max_time,
        seed=args.seed,
        threads=args.threads,
    )


def _cmd_run(args) -> int:
    model = get_model(args.model)
    env = load_environment(args.env)
    cfg = _config_from_args(args, model)
    if args.dump_regions and args.out is None:
        raise KinopaxError("--dump-regions requires --out DIR")
    trace_fn = None
    if args.trace:
        def trace_fn(t):
            print(f"iter={t.iteration} lambda={t.branching} ve={t.ve_size} "
                  f"vo={t.vo_size} attempted={t.attempted} staged={t.staged} "
                  f"appended={t.appended} size={t.tree_size} "
                  f"elapsed_ms={t.elapsed_s * 1e3:.1f}", file=sys.stderr)
    run_trials(cfg, env, model, planner=args.planner, n_trials=args.trials,
               check_resolution=args.check_res, backend=args.backend,
               out_dir=args.out, parallel_trials=args.parallel_trials,
               trace_fn=trace_fn,
               dump_regions_dir=args.out if args.dump_regions else None,
               quiet=False)
    return 0


def _cmd_sweep(args) -> int:
    model = get_model(args.model)
    env = load_environment(args.env)
    cfg = _config_from_args(args, model)
    try:
        te_values = [int(v) for v in args.te_list.split(",") if v.strip()]
    except ValueError:
        raise KinopaxError("--te-list must be a comma-separated list of integers")
    if not te_values:
        raise KinopaxError("--te-list is empty")
    sweep_te(cfg, env, model, te_values, args.trials,
             check_resolution=args.check_res, backend=args.backend,
             out_dir=args.out, quiet=False)
    return 0


def _cmd_gen_env(args) -> int:
    gen_environment(args.kind, args.model, seed=args.seed, path=args.out,
                    pillars=args.pillars, pillar_size=args.pillar_size,
                    gap=args.gap, wall_thickness=args.wall_thickness)
    print(f"wrote {args.out}")
    return 0


def _cmd_bench_backends(args) -> int:
    from .bench_backends import run_backend_benchmark

    run_backend_benchmark(model_name=args.model, t_e=args.te,
                          trials=args.trials, seed=args.seed,
                          threads=args.threads)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kinopax",
                     description="Parallel kinodynamic motion planning benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run seeded planning trials")
    _add_planning_flags(p_run)
    p_run.add_argument("--planner", choices=PLANNERS, default="kinopax")
    p_run.add_argument("--trace", action="store_true",
                       help="per-iteration diagnostics on stderr")
    p_run.add_argument("--dump-regions", action="store_true",
                       help="dump per-region metrics after each trial")
    p_run.add_argument("--parallel-trials", action="store_true",
                       help="run trials concurrently (rrt baseline only)")
    p_run.set_defaults(fn=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="sweep the tree capacity t_e")
    _add_planning_flags(p_sweep)
    p_sweep.add_argument("--te-list", required=True,
                         help="comma-separated increasing t_e values")
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_gen = sub.add_parser("gen-env", help="generate a benchmark scene file")
    p_gen.add_argument("--kind", required=True, choices=ENV_KINDS)
    p_gen.add_argument("--model", required=True, choices=model_names())
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True, help="output JSON path")
    p_gen.add_argument("--pillars", type=int, default=14)
    p_gen.add_argument("--pillar-size", type=float, default=0.6)
    p_gen.add_argument("--gap", type=float, default=1.0)
    p_gen.add_argument("--wall-thickness", type=float, default=0.4)
    p_gen.set_defaults(fn=_cmd_gen_env)

    p_bb = sub.add_parser("bench-backends",
                          help="compare compiled and pure-Python kernels")
    p_bb.add_argument("--model", choices=model_names(), default="di6")
    p_bb.add_argument("--te", type=int, default=4000)
    p_bb.add_argument("--trials", type=int, default=3)
    p_bb.add_argument("--seed", type=int, default=0)
    p_bb.add_argument("--threads", type=int, default=1)
    p_bb.set_defaults(fn=_cmd_bench_backends)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except EnvironmentIOError as exc:
        print(f"kinopax: I/O error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"kinopax: I/O error: {exc}", file=sys.stderr)
        return 2
    except (KinopaxError, ValueError) as exc:
        print(f"kinopax: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
