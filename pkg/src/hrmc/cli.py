"""Command-line front end.

Exit status: 0 on success, 2 when some columns were left unassigned, 1 on any
fatal or usage error.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import io as hio
from .datagen import HopModelConfig, apply_bernoulli_mask, gen_hopcount_matrix, gen_union_of_subspaces
from .errors import HRMCError
from .lowrank import SolverConfig, complete_lowrank
from .pipeline import (
    ParamWarning,
    PipelineConfig,
    complete_matrix,
    derive_params,
    practical_overrides,
)

log = logging.getLogger("hrmc")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2

# keys that configure the run but are not forwarded anywhere
_META_KEYS = {"command", "config", "explain", "verbose"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would read as "partial"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FATAL, f"{self.prog}: error: {message}\n")


def _env_seed() -> int:
    raw = os.environ.get("UOS_SEED")
    if raw is None or raw.strip() == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"UOS_SEED must be an integer, got {raw!r}") from None


def _int_pair(text: str):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected LO,HI")
    return tuple(int(p) for p in parts)


def _float_list(text: str):
    return tuple(float(p) for p in text.split(",") if p.strip())


def _str_list(text: str):
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _add_common(p):
    g = p.add_argument_group("run control")
    g.add_argument("--seed", type=int, default=None,
                   help="master seed (default: $UOS_SEED, else 0)")
    g.add_argument("--threads", type=int, default=1, help="worker threads")
    g.add_argument("--config", type=Path, help="key=value file; flags take precedence")
    g.add_argument("--explain", action="store_true",
                   help="print the resolved configuration and exit")
    g.add_argument("--timings", action="store_true",
                   help="include wall times in outputs (makes them non-reproducible)")
    g.add_argument("-v", "--verbose", action="count", default=0)


def _add_solver(p):
    g = p.add_argument_group("low-rank solver")
    g.add_argument("--mc-tol", type=float, default=1e-6,
                   help="relative observed rmse counted as an exact fit")
    g.add_argument("--mc-max-iter", type=int, default=500)
    g.add_argument("--mc-restarts", type=int, default=5)
    g.add_argument("--mc-backend", choices=("als", "grassmann"), default="als")


def _add_model(p, need_shape: bool):
    g = p.add_argument_group("model")
    if need_shape:
        g.add_argument("-n", type=int, required=True, help="ambient dimension (rows)")
        g.add_argument("-N", type=int, required=True, help="number of columns")
    g.add_argument("-k", type=int, required=True, help="number of subspaces")
    g.add_argument("-r", type=int, required=True, help="subspace dimension bound")
    g.add_argument("--mu0", type=float, default=1.0)
    g.add_argument("--mu1", type=float, default=1.0)
    g.add_argument("--nu0", type=float, default=0.5)
    g.add_argument("--eps0", type=float, default=0.25)
    g.add_argument("--beta", type=float, default=1.5)
    g.add_argument("--p0", type=float, default=None,
                   help="sampling rate (default: 1, or the observed fraction)")


def _add_overrides(p, preset_default):
    g = p.add_argument_group("derived-value overrides")
    if preset_default is not None:
        g.add_argument("--preset", choices=("practical", "theory"), default=preset_default,
                       help="'theory' uses the formulas verbatim; 'practical' substitutes "
                            "desk-scale seeds, thresholds and neighborhood size")
    g.add_argument("--delta0", type=float)
    g.add_argument("--s0", type=int)
    g.add_argument("--ell0", type=int)
    g.add_argument("--t0", type=int)
    g.add_argument("--eta0", type=float)
    g.add_argument("--seeds", type=int, help="number of seeds (overrides s0 as a count)")
    g.add_argument("--neighborhood-size", type=int)
    g.add_argument("--neighbor-rule", choices=("ball", "nearest"))
    g.add_argument("--no-thinning", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hrmc", description="Union-of-subspaces matrix completion.")
    parser.add_argument("--version", action="version", version=f"hrmc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("params", help="print derived pipeline parameters")
    _add_model(p, need_shape=True)
    _add_overrides(p, preset_default="theory")
    p.add_argument("--json", action="store_true", help="print JSON instead of key = value")
    _add_common(p)

    p = sub.add_parser("generate", help="draw a ground-truth matrix and an observation mask")
    p.add_argument("--model", choices=("union", "hopcount"), default="union")
    p.add_argument("-n", type=int, required=True, help="rows (monitors for hopcount)")
    p.add_argument("-N", type=int, required=True, help="columns (hosts for hopcount)")
    p.add_argument("-k", type=int, required=True, help="subspaces (subnets for hopcount)")
    p.add_argument("-r", type=int, default=None, help="subspace dimension (union model)")
    p.add_argument("--p0", type=float, default=1.0, help="observation probability")
    p.add_argument("--min-angle", type=float, default=0.2)
    p.add_argument("--normalize", choices=("unit", "max", "none"), default="unit")
    p.add_argument("--hop-backend", choices=("direct", "graph"), default="direct")
    p.add_argument("--border-hops", type=_int_pair, default=(5, 30))
    p.add_argument("--host-offsets", type=_int_pair, default=(1, 5))
    p.add_argument("--routers", type=int, default=600)
    p.add_argument("-o", "--out", type=Path, required=True, help="output directory")
    _add_common(p)

    p = sub.add_parser("complete", help="complete a sparse matrix with the subspace pipeline")
    p.add_argument("input", type=Path, help="sparse matrix file")
    _add_model(p, need_shape=False)
    _add_overrides(p, preset_default="practical")
    p.add_argument("--assign-tol", type=float, default=1e-8)
    p.add_argument("--refine-tol", type=float, default=None)
    p.add_argument("-o", "--out", type=Path, required=True, help="output directory")
    _add_solver(p)
    _add_common(p)

    p = sub.add_parser("complete-lowrank", help="complete the whole matrix at one low rank")
    p.add_argument("input", type=Path, help="sparse matrix file")
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--rank-search", choices=("ascending", "max"), default="max")
    p.add_argument("-o", "--out", type=Path, required=True, help="output directory")
    _add_solver(p)
    _add_common(p)

    p = sub.add_parser("bench", help="run a comparison sweep and write CSV and SVG reports")
    p.add_argument("--experiment", choices=("synthetic", "network"), default="synthetic")
    p.add_argument("-n", type=int)
    p.add_argument("-N", type=int)
    p.add_argument("-k", type=int)
    p.add_argument("-r", type=int, help="subspace dimension (synthetic only)")
    p.add_argument("--grid", type=_float_list, help="comma-separated sweep values")
    p.add_argument("--trials", type=int)
    p.add_argument("--methods", type=_str_list, help="subset of highrank,lowrank")
    p.add_argument("--tolerances", type=_float_list)
    p.add_argument("--baseline-max-iter", type=int, default=500)
    p.add_argument("--no-plots", action="store_true")
    p.add_argument("-o", "--out", type=Path, required=True, help="output directory")
    _add_overrides(p, preset_default=None)
    _add_solver(p)
    _add_common(p)
    return parser


# ----------------------------------------------------------------- config file


def _subparser(parser, command):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def _convert(action, raw: str, where: str):
    if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            val = True
        elif low in ("0", "false", "no", "off"):
            val = False
        else:
            raise UsageError(f"{where}: expected a boolean, got {raw!r}")
        return val if isinstance(action, argparse._StoreTrueAction) else not val
    if isinstance(action, argparse._CountAction):
        conv = int
    else:
        conv = action.type or str
    try:
        val = conv(raw)
    except (ValueError, argparse.ArgumentTypeError) as exc:
        raise UsageError(f"{where}: bad value {raw!r} for {action.dest}: {exc}") from None
    if action.choices is not None and val not in action.choices:
        raise UsageError(f"{where}: {action.dest} must be one of {sorted(action.choices)}")
    return val


def read_config(path: Path, sub) -> dict:
    """Parse ``key = value`` lines; keys are option names without dashes."""
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{path}:{no}"
        if "=" not in line:
            raise UsageError(f"{where}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in actions or key in _META_KEYS:
            raise UsageError(f"{where}: unknown key {key!r}")
        out[key] = _convert(actions[key], raw, where)
    return out


def _given_flags(sub, argv) -> set:
    given = set()
    for a in sub._actions:
        if not a.option_strings:
            given.add(a.dest)
        for opt in a.option_strings:
            if any(tok == opt or tok.startswith(opt + "=") for tok in argv):
                given.add(a.dest)
    return given


def _prescan(argv):
    """Find the subcommand and any ``--config`` path before full parsing."""
    command, config = None, None
    for i, tok in enumerate(argv):
        if command is None and tok in COMMANDS:
            command = tok
        elif tok == "--config" and i + 1 < len(argv):
            config = argv[i + 1]
        elif tok.startswith("--config="):
            config = tok.split("=", 1)[1]
    return command, config


def parse(argv):
    """Parse with precedence flags > config file > defaults.

    Returns ``(args, sources)`` where ``sources`` maps each key to
    ``"flag"``, ``"config"`` or ``"default"``.
    """
    parser = build_parser()
    command, config = _prescan(argv)
    cfg = {}
    if command is not None and config is not None:
        sub = _subparser(parser, command)
        cfg = read_config(Path(config), sub)
        sub.set_defaults(**cfg)
        # a config value satisfies a required flag
        for a in sub._actions:
            if a.dest in cfg:
                a.required = False
    args = parser.parse_args(argv)
    given = _given_flags(_subparser(parser, args.command), argv)
    sources = {}
    for key in vars(args):
        sources[key] = "flag" if key in given else "config" if key in cfg else "default"
    if args.seed is None:
        args.seed = _env_seed()
        sources["seed"] = "env UOS_SEED" if "UOS_SEED" in os.environ else "default"
    return args, sources


def explain(args, sources) -> str:
    lines = [f"# resolved configuration for '{args.command}'"]
    for key in sorted(vars(args)):
        if key in ("command", "explain"):
            continue
        val = getattr(args, key)
        if isinstance(val, float):
            val = hio.fmt_float(val)
        lines.append(f"{key} = {val}  # {sources.get(key, 'default')}")
    return "\n".join(lines)


# -------------------------------------------------------------------- commands


def _solver_cfg(args, **kw) -> SolverConfig:
    return SolverConfig(exact_tol=args.mc_tol, max_iter=args.mc_max_iter,
                        max_restarts=args.mc_restarts, backend=args.mc_backend, **kw)


def _override_kwargs(args) -> dict:
    """Explicit override flags as derive_params keyword arguments."""
    kw = {}
    for flag, key in (("delta0", "delta0"), ("s0", "s0"), ("ell0", "ell0"), ("t0", "t0"),
                      ("eta0", "eta0"), ("seeds", "seed_count_override"),
                      ("neighborhood_size", "neighborhood_size"),
                      ("neighbor_rule", "neighbor_rule")):
        val = getattr(args, flag, None)
        if val is not None:
            kw[key] = val
    if getattr(args, "no_thinning", False):
        kw["thinning_enabled"] = False
    return kw


def _derive(args, n, N, p0):
    kw = {}
    if getattr(args, "preset", "theory") == "practical":
        kw.update(practical_overrides(n, N, args.k, args.r))
    kw.update(_override_kwargs(args))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ParamWarning)
        params = derive_params(n, N, args.k, args.r, args.mu0, args.mu1, args.nu0,
                               args.eps0, args.beta, p0, **kw)
    return params, [str(w.message) for w in caught if issubclass(w.category, ParamWarning)]


def _fmt(v):
    if isinstance(v, float):
        return hio.fmt_float(v)
    return str(v)


def cmd_params(args) -> int:
    p0 = 1.0 if args.p0 is None else args.p0
    try:
        params, notes = _derive(args, args.n, args.N, p0)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rep = params.report()
    rep.pop("warnings")
    rep["n_seeds"] = params.n_seeds
    if args.json:
        import json

        print(json.dumps({"params": rep, "warnings": notes}, indent=2, sort_keys=True,
                         default=lambda o: None))
    else:
        order = ["delta0", "s0", "ell0", "t0", "eta0", "p0_min", "N_min", "N_min_derivation"]
        rest = sorted(k for k in rep if k not in order)
        for key in order + rest:
            print(f"{key} = {_fmt(rep[key])}")
        for msg in notes:
            print(f"warning: {msg}")
    return EXIT_OK


def cmd_generate(args) -> int:
    truth_seq, mask_seq = np.random.SeedSequence(args.seed).spawn(2)
    rng = np.random.default_rng(truth_seq)
    if args.model == "union":
        if args.r is None:
            raise UsageError("-r is required for the union model")
        truth = gen_union_of_subspaces(args.n, args.N, args.k, args.r, rng,
                                       min_angle=args.min_angle, normalize=args.normalize)
    else:
        cfg = HopModelConfig(backend=args.hop_backend, border_hops=args.border_hops,
                             host_offsets=args.host_offsets, n_routers=args.routers)
        truth = gen_hopcount_matrix(args.n, args.N, args.k, cfg, rng)
    obs = apply_bernoulli_mask(truth, args.p0, np.random.default_rng(mask_seq))
    out = args.out
    hio.write_sparse(out / "observed.txt", obs)
    hio.write_dense(out / "truth.txt", truth.full_matrix)
    hio.write_labels(out / "labels.txt", truth.labels)
    hio.write_dense_blocks(out / "truth_subspaces.txt", [s.basis for s in truth.subspaces],
                           [f"subspace {i}" for i in range(len(truth.subspaces))])
    meta = dict(truth.model_meta, seed=args.seed, p0=args.p0, nnz=obs.nnz)
    hio.write_json(out / "meta.json", meta)
    print(f"wrote {out}/observed.txt ({obs.nnz} of {obs.n_rows * obs.n_cols} entries observed)")
    return EXIT_OK


def cmd_complete(args) -> int:
    obs = hio.read_sparse(args.input)
    n, N = obs.shape
    p0 = args.p0 if args.p0 is not None else obs.nnz / (n * N)
    try:
        params, notes = _derive(args, n, N, p0)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    for msg in notes:
        print(f"warning: {msg}", file=sys.stderr)
    cfg = PipelineConfig(solver=_solver_cfg(args), assign_tol=args.assign_tol,
                         refine_tol=args.refine_tol, threads=args.threads)
    res = complete_matrix(obs, params, cfg, seed=args.seed)

    out = args.out
    hio.write_dense(out / "completed.txt", res.completed_matrix(obs))
    n_sub = len(res.subspaces)
    header = ["column", "status", "assigned_subspace", "n_observed"] + \
             [f"residual_{i}" for i in range(n_sub)]
    counts = obs.column_counts()
    rows = []
    for rep in res.reports:
        assigned = "" if rep.assigned_subspace is None else rep.assigned_subspace
        rows.append([rep.column, rep.status, assigned, int(counts[rep.column])]
                    + [float(v) for v in rep.residuals])
    hio.write_csv(out / "report.csv", header, rows)
    hio.write_dense_blocks(out / "subspaces.txt", [s.basis for s in res.subspaces],
                           [f"subspace {i} (dim {s.dim})" for i, s in enumerate(res.subspaces)])
    diag = {k: v for k, v in res.diagnostics.items() if k != "timing" or args.timings}
    params_rep = params.report()
    params_rep = {k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                  for k, v in params_rep.items()}
    summary = dict(shape=list(obs.shape), nnz=obs.nnz, seed=args.seed,
                   status_counts=res.status_counts, n_subspaces=n_sub,
                   params=params_rep, diagnostics=diag)
    hio.write_json(out / "summary.json", summary)
    done = res.n_completed
    print(f"completed {done}/{N} columns with {n_sub} subspaces; outputs in {out}")
    return EXIT_OK if done == N else EXIT_PARTIAL


def cmd_complete_lowrank(args) -> int:
    obs = hio.read_sparse(args.input)
    cfg = _solver_cfg(args, rank_search=args.rank_search)
    res = complete_lowrank(obs, args.rank, cfg, np.random.default_rng(np.random.SeedSequence(args.seed)))
    out = args.out
    hio.write_dense(out / "completed.txt", res.completed)
    hio.write_json(out / "summary.json", dict(
        shape=list(obs.shape), nnz=obs.nnz, seed=args.seed, rank=res.basis.dim,
        observed_rmse=res.observed_rmse, relative_rmse=res.relative_rmse,
        converged=res.converged, iterations=res.iterations))
    print(f"rank {res.basis.dim} fit, relative observed rmse {res.relative_rmse:.3g}; outputs in {out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import network_spec, run_experiment, synthetic_spec, write_report

    kw = {}
    for key in ("n", "N", "k", "r", "trials"):
        if getattr(args, key) is not None:
            kw[key] = getattr(args, key)
    if args.experiment == "network":
        kw.pop("r", None)
    if args.grid is not None:
        kw["grid"] = args.grid
    if args.methods is not None:
        kw["methods"] = args.methods
    if args.tolerances is not None:
        kw["tolerances"] = args.tolerances
    kw["seed"] = args.seed
    kw["threads"] = args.threads
    kw["pipeline"] = PipelineConfig(solver=_solver_cfg(args))
    kw["baseline"] = SolverConfig(rank_search="max", max_restarts=0,
                                  max_iter=args.baseline_max_iter, backend=args.mc_backend)
    make = synthetic_spec if args.experiment == "synthetic" else network_spec
    try:
        spec = make(**kw)
        overrides = dict(spec.pipeline_overrides, **_override_kwargs(args))
        spec = make(pipeline_overrides=overrides, **kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    res = run_experiment(spec)
    paths = write_report(res, args.out, timings=args.timings, plots=not args.no_plots)
    for method in spec.methods:
        for v in spec.grid:
            cells = ", ".join(f"tol {t:g}: {res.mean_correct(method, v, t):.1f}"
                              for t in spec.tolerances)
            fails = sum(r.failure is not None for r in res.select(method, v))
            print(f"{method} {spec.sweep_axis}={v:g}: mean correct columns {cells}"
                  + (f" ({fails} failed trials)" if fails else ""))
    print("wrote " + ", ".join(str(p) for p in paths))
    return EXIT_OK


COMMANDS = {
    "params": cmd_params,
    "generate": cmd_generate,
    "complete": cmd_complete,
    "complete-lowrank": cmd_complete_lowrank,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args, sources = parse(argv)
    except UsageError as exc:
        print(f"hrmc: error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.explain:
        print(explain(args, sources))
        return EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"hrmc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except (HRMCError, ValueError, OSError) as exc:
        print(f"hrmc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
