"""Command line interface: ``pressure-embed <command> ...``.

Commands: generate, embed, diagnose, pp, benchmark. Exit codes are 0 on
success, 1 on usage, validation or I/O errors and 2 when an optimizer stopped
without converging (its output is still written).

Any command accepts ``--config FILE`` with flat ``key=value`` lines; keys are
the long flag names (``max-iter`` or ``max_iter``). Flags given on the command
line take precedence over the file.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import data_io
from .affinity import AffinityConfig, build_affinities
from .augmented import make_mu_schedule
from .core import CalibrationError, ConfigurationError, EvaluationError, ValidationError
from .objectives import Method, objective
from .optimizer import (
    OptimConfig,
    benchmark_summary,
    minimize,
    pp_optimize,
    random_init,
    restart_benchmark,
)
from .pressure import compute_pressure

PROGRESS_EVERY = 25
EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for non-convergence here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _add_input(p, labels_help="input has an integer label column last"):
    p.add_argument("input", help="delimited text file, one point per row")
    p.add_argument("--delimiter", default=",", help="field separator (default ',')")
    p.add_argument("--labels", action="store_true", help=labels_help)


def _add_affinity(p):
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--perplexity", type=float, default=None,
                     help="calibrated bandwidths (default 30, capped at (N-1)/3)")
    grp.add_argument("--sigma", type=float, default=None, help="fixed Gaussian bandwidth")
    p.add_argument("--lambda", dest="lam", metavar="LAMBDA", type=float, default=1.0, help="EE repulsion weight (default 1)")
    p.add_argument("--w-minus", choices=("sqdist", "uniform"), default="sqdist",
                   help="EE repulsion weights (default sqdist)")


def _add_optim(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-5,
                   help="stop when an iteration lowers the objective by less (default 1e-5)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pressure-embed",
                     description="Nonlinear embeddings with pressured-point diagnostics.")
    parser.add_argument("--config", default=None, help="key=value file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a synthetic dataset")
    p.add_argument("kind", choices=("swissroll", "rings", "clusters"))
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=None, help="points (swissroll 1000, clusters 60)")
    p.add_argument("--noise", type=float, default=0.0, help="swissroll noise")
    p.add_argument("--n-objects", type=int, default=10, help="rings")
    p.add_argument("--points-per-ring", type=int, default=72)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--separation", type=float, default=None, help="rings 1.5, clusters 5")
    p.add_argument("--n-clusters", type=int, default=3)
    p.add_argument("--dim", type=int, default=5, help="clusters dimension")
    p.add_argument("--labels", action="store_true", help="append the label column")
    p.add_argument("--delimiter", default=",")

    p = sub.add_parser("embed", help="Spectral Direction minimization")
    _add_input(p)
    p.add_argument("--method", choices=("ee", "sne", "tsne", "umap"), default="ee")
    p.add_argument("--dim", type=int, default=2)
    _add_affinity(p)
    p.add_argument("--umap-a", type=float, default=1.0)
    p.add_argument("--umap-b", type=float, default=1.0)
    _add_optim(p)
    p.add_argument("--out", required=True, help="embedding file")
    p.add_argument("--trace-out", default=None, help="JSON lines trace")
    p.add_argument("--plot", default=None, help="SVG scatter (d=2 only)")

    p = sub.add_parser("diagnose", help="pressure of every point of an embedding")
    _add_input(p)
    p.add_argument("embedding")
    p.add_argument("--method", choices=("ee", "sne", "tsne", "umap"), default="ee")
    _add_affinity(p)
    p.add_argument("--umap-a", type=float, default=1.0)
    p.add_argument("--umap-b", type=float, default=1.0)
    p.add_argument("--out-report", default=None, help="JSON lines report")
    p.add_argument("--out-plot", default=None, help="SVG scatter sized by pressure")

    p = sub.add_parser("pp", help="pressured-points optimization")
    _add_input(p)
    p.add_argument("--method", choices=("ee", "sne"), default="ee")
    p.add_argument("--dim", type=int, default=2)
    _add_affinity(p)
    _add_optim(p)
    p.add_argument("--init", choices=("random", "file"), default="random")
    p.add_argument("--init-file", default=None, help="embedding for --init file")
    p.add_argument("--mu-strategy", choices=("mean", "max", "min"), default="mean")
    p.add_argument("--out", required=True)
    p.add_argument("--trace-out", default=None)
    p.add_argument("--trace-plot", default=None, help="SVG of the trace with mu-change markers")

    p = sub.add_parser("benchmark", help="SD restarts, each refined by PP")
    _add_input(p)
    p.add_argument("--method", choices=("ee", "sne"), default="ee")
    p.add_argument("--dim", type=int, default=2)
    _add_affinity(p)
    _add_optim(p)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--mu-strategy", choices=("mean", "max", "min"), default="mean")
    p.add_argument("--out-table", default=None, help="also write the table here")
    return parser


def read_config(path) -> dict:
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}: line {lineno} is not key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _config_keys(parser):
    keys = {"lambda"}
    for name in COMMANDS:
        keys.update(a.dest for a in _subparser(parser, name)._actions)
    return keys - {"help", "input", "embedding", "kind"}


def _apply_config(parser, command, config):
    """Turn config entries into defaults of ``command``'s parser.

    Keys belonging only to other commands are ignored so one file can serve
    several commands; keys no command knows are errors.
    """
    known = _config_keys(parser)
    sub = _subparser(parser, command)
    actions = {a.dest: a for a in sub._actions}
    if "lam" in actions:
        actions["lambda"] = actions["lam"]
    defaults = {}
    for key, value in config.items():
        if key not in known:
            raise UsageError(f"unknown config key {key!r}")
        action = actions.get(key)
        if action is None or key in ("help", "input", "embedding", "kind"):
            continue
        if isinstance(action, argparse._StoreTrueAction):
            if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise UsageError(f"config key {key!r} expects true or false")
            defaults[action.dest] = value.lower() in ("true", "1", "yes")
        else:
            if action.choices is not None and value not in action.choices:
                raise UsageError(f"config key {key!r}: {value!r} is not one of {sorted(action.choices)}")
            # string defaults pass through the action's type conversion
            defaults[action.dest] = value
        action.required = False
    sub.set_defaults(**defaults)


def parse_args(argv):
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, rest = pre.parse_known_args(argv)
    if known.config is not None:
        command = next((a for a in rest if a in COMMANDS), None)
        if command is not None:
            _apply_config(parser, command, read_config(known.config))
    return parser.parse_args(argv)


def _progress(label):
    def cb(rec):
        if rec.iter % PROGRESS_EVERY == 0:
            print(f"[{label}] iter {rec.iter} objective {rec.objective:.10g} "
                  f"pressured {rec.pressured_fraction:.4f}", file=sys.stderr)
    return cb


def _load(args):
    return data_io.load_delimited(args.input, args.delimiter, args.labels)


def _affinity(args, n):
    perplexity = args.perplexity
    if perplexity is None and args.sigma is None:
        perplexity = min(30.0, (n - 1) / 3.0)
    return AffinityConfig(sigma=args.sigma, perplexity=perplexity, lam=args.lam,
                         w_minus_mode=args.w_minus)


def _method(args):
    return Method(args.method, getattr(args, "umap_a", 1.0), getattr(args, "umap_b", 1.0))


def _optim(args):
    return OptimConfig(max_iter=args.max_iter, conv_tol=args.tol, seed=args.seed)


def cmd_generate(args) -> int:
    if args.kind == "swissroll":
        data = data_io.generate_swissroll(args.n or 1000, args.noise, args.seed)
    elif args.kind == "rings":
        sep = 1.5 if args.separation is None else args.separation
        data = data_io.generate_rings(args.n_objects, args.points_per_ring, args.radius, sep, args.seed)
    else:
        sep = 5.0 if args.separation is None else args.separation
        data = data_io.generate_clusters(args.n or 60, args.n_clusters, args.dim, 1.0, sep, args.seed)
    labels = data.labels if args.labels else None
    data_io.save_delimited(args.out, data.points, labels, args.delimiter)
    print(f"wrote {data.points.shape[0]} points to {args.out}")
    return EXIT_OK


def cmd_embed(args) -> int:
    data = _load(args)
    g = build_affinities(data.points, _affinity(args, data.n))
    m = _method(args)
    x0 = random_init(data.n, args.dim, np.random.default_rng(args.seed))
    run = minimize(m, g, x0, _optim(args), callback=_progress("embed"))
    data_io.save_embedding(args.out, run.final_embedding)
    if args.trace_out:
        data_io.save_trace(args.trace_out, run)
    if args.plot:
        report = compute_pressure(m, g, run.final_embedding)
        data_io.render_scatter(run.final_embedding, args.plot, report, data.labels)
    print(f"objective {run.final_objective:.10g} after {len(run.trace)} iterations")
    for w in run.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK if run.converged else EXIT_NOT_CONVERGED


def cmd_diagnose(args) -> int:
    data = _load(args)
    emb = data_io.load_embedding(args.embedding, args.delimiter)
    if emb.n != data.n:
        raise ValidationError(f"embedding has {emb.n} rows, input has {data.n}")
    g = build_affinities(data.points, _affinity(args, data.n))
    report = compute_pressure(_method(args), g, emb)
    if args.out_report:
        data_io.save_report(args.out_report, report)
    if args.out_plot:
        data_io.render_scatter(emb, args.out_plot, report, data.labels)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"pressured fraction {report.fraction}")
    return EXIT_OK


def cmd_pp(args) -> int:
    data = _load(args)
    g = build_affinities(data.points, _affinity(args, data.n))
    m = _method(args)
    if args.init == "file":
        if not args.init_file:
            raise UsageError("--init file needs --init-file")
        x0 = data_io.load_embedding(args.init_file, args.delimiter).coords
        if x0.shape[0] != data.n:
            raise ValidationError(f"init embedding has {x0.shape[0]} rows, input has {data.n}")
    else:
        if args.init_file:
            raise UsageError("--init-file is only used with --init file")
        x0 = random_init(data.n, args.dim, np.random.default_rng(args.seed))
    start = objective(m, g, x0)[0]
    run = pp_optimize(m, g, x0, make_mu_schedule(g, args.mu_strategy), _optim(args),
                      callback=_progress("pp"))
    data_io.save_embedding(args.out, run.final_embedding)
    if args.trace_out:
        data_io.save_trace(args.trace_out, run)
    if args.trace_plot:
        data_io.render_trace(run, args.trace_plot)
    print(f"initial objective {start:.10g}")
    print(f"final objective {run.final_objective:.10g}")
    print(f"improvement {start - run.final_objective:.10g} after {run.mu_steps} mu values")
    for w in run.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK if run.converged else EXIT_NOT_CONVERGED


def format_table(pairs) -> str:
    lines = ["seed\tsd_final\tpp_final\timprovement\tmu_steps"]
    for i, (sd, pp) in enumerate(pairs):
        lines.append(f"{i}\t{sd.final_objective:.10f}\t{pp.final_objective:.10f}\t"
                     f"{sd.final_objective - pp.final_objective:.10f}\t{pp.mu_steps}")
    s = benchmark_summary(pairs)
    lines.append(f"SD\t{s['sd_mean']:.6f} ± {s['sd_std']:.6f}")
    lines.append(f"PP\t{s['pp_mean']:.6f} ± {s['pp_std']:.6f}")
    lines.append(f"improved\t{s['improved']}/{s['n']}")
    return "\n".join(lines) + "\n"


def cmd_benchmark(args) -> int:
    if args.restarts < 1:
        raise UsageError("--restarts must be at least 1")
    data = _load(args)
    g = build_affinities(data.points, _affinity(args, data.n))
    pairs = restart_benchmark(_method(args), g, args.restarts, _optim(args), args.dim, args.mu_strategy)
    table = format_table(pairs)
    if args.out_table:
        try:
            Path(args.out_table).write_text(table, encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write {args.out_table}: {exc}") from exc
    sys.stdout.write(table)
    ok = all(sd.converged and pp.converged for sd, pp in pairs)
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


COMMANDS = {
    "generate": cmd_generate,
    "embed": cmd_embed,
    "diagnose": cmd_diagnose,
    "pp": cmd_pp,
    "benchmark": cmd_benchmark,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_ERROR
    except (UsageError, ValidationError, ConfigurationError, CalibrationError,
            EvaluationError, OSError) as exc:
        print(f"pressure-embed: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
