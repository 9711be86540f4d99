"""Command line surface.

Exit codes: 0 success, 1 usage or config error, 2 audit failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .decomposition import hooi, one_step_hooi, st_hosvd, t_hosvd
from .simulate import (
    ConfigError,
    ExperimentConfig,
    run_bounds_audit,
    run_cocluster_experiment,
    run_denoise_experiment,
    run_lower_bound_check,
)
from .svgplot import PLOT_KINDS, emit_plot
from .tensor import ModeGroups, read_tns1, validate_groups, write_tns1

USAGE_EXIT, AUDIT_EXIT, IO_EXIT = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _parse_ints(text):
    return tuple(int(v) for v in text.split(","))


def _parse_groups(text, order):
    """Parse semicolon-separated 1-based groups, e.g. '1,2;3' -> ((0,1),(2,))."""
    groups = []
    for chunk in text.split(";"):
        modes = tuple(int(v) - 1 for v in chunk.split(",") if v.strip())
        if not modes:
            raise ValueError("empty group")
        groups.append(modes)
    covered = [m for g in groups for m in g]
    if sorted(covered) != list(range(order)):
        raise ValueError(f"groups {text!r} must cover modes 1..{order} exactly once")
    return tuple(groups)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tuckerkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="fit one tensor from a TNS1 file")
    p.add_argument("--input", required=True, help="input tensor (TNS1)")
    p.add_argument("--ranks", required=True, help="comma-separated ranks, one per group")
    p.add_argument(
        "--algo", default="hooi", choices=["hooi", "ohooi", "thosvd", "sthosvd"]
    )
    p.add_argument("--groups", default=None, help="1-based mode groups, e.g. '1,2;3'")
    p.add_argument("--tmax", type=int, default=50)
    p.add_argument("--init", default="sthosvd", choices=["sthosvd", "thosvd", "random"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output path prefix")

    for name in ("denoise-sim", "cocluster-sim", "bounds-audit"):
        p = sub.add_parser(name, help=f"run a {name.replace('-', ' ')} from a JSON config")
        p.add_argument("--config", required=True)
        if name == "denoise-sim":
            p.add_argument(
                "--paper-scale",
                action="store_true",
                help="use the original (10,100,500) dimensions for subspace runs",
            )

    p = sub.add_parser("lower-bound", help="verify the reconstruction-floor construction")
    p.add_argument("--dims", required=True, help="comma-separated dimensions")
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--xi", type=float, required=True, help="noise energy of the construction")

    p = sub.add_parser("plot", help="render a summary CSV to SVG")
    p.add_argument("--csv", required=True)
    p.add_argument("--kind", required=True, choices=sorted(PLOT_KINDS))
    p.add_argument("--out", default=None)
    return parser


def _cmd_decompose(args) -> int:
    X = read_tns1(args.input)
    ranks = _parse_ints(args.ranks)
    groups = None
    if args.groups:
        groups = validate_groups(X.shape, _parse_groups(args.groups, X.ndim), ranks)
    if groups is None and len(ranks) != X.ndim:
        raise ValueError(f"need {X.ndim} ranks for an order-{X.ndim} tensor")
    if args.algo == "hooi":
        fit = hooi(X, ranks, groups=groups, init=args.init, t_max=args.tmax,
                   random_state=args.seed)
    elif args.algo == "ohooi":
        fit = one_step_hooi(X, ranks, groups=groups, init=args.init, random_state=args.seed)
    elif args.algo == "thosvd":
        fit = t_hosvd(X, ranks, groups=groups)
    else:
        fit = st_hosvd(X, ranks, groups=groups)
    for gi, U in enumerate(fit.factors, start=1):
        write_tns1(f"{args.out}_factor{gi}.tns", np.asarray(U))
    write_tns1(f"{args.out}_core.tns", fit.core)
    write_tns1(f"{args.out}_reconstruction.tns", fit.reconstruction)
    summary = {
        "algorithm": args.algo,
        "ranks": list(ranks),
        # 1-based, matching the --groups flag syntax
        "groups": [[m + 1 for m in g] for g in fit.groups.groups],
        "sweeps": fit.n_iter,
        "captured_norms": [rec.captured_norm for rec in fit.trace],
    }
    with open(f"{args.out}_summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    print(f"wrote {args.out}_core.tns and {fit.groups.n_groups} factor file(s)")
    return 0


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config)
    if getattr(args, "paper_scale", False) and cfg.kind == "denoise_subspace":
        cfg.dims = [[10, 100, 500]]
    return cfg


def _cmd_denoise(args) -> int:
    cfg = _load_config(args)
    trials, summary, _ = run_denoise_experiment(cfg)
    print(f"wrote {trials} and {summary}")
    return 0


def _cmd_cocluster(args) -> int:
    cfg = _load_config(args)
    trials, summary, _ = run_cocluster_experiment(cfg)
    print(f"wrote {trials} and {summary}")
    return 0


def _cmd_audit(args) -> int:
    cfg = _load_config(args)
    path, results = run_bounds_audit(cfg)
    print(f"wrote {path}: {results['n_fail']} failed check(s)")
    return 0 if results["pass"] else AUDIT_EXIT


def _cmd_lower_bound(args) -> int:
    report = run_lower_bound_check(_parse_ints(args.dims), args.rank, args.xi)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0 if report["pass"] else AUDIT_EXIT


def _cmd_plot(args) -> int:
    out = args.out or f"{args.csv.rsplit('.', 1)[0]}_{args.kind}.svg"
    emit_plot(args.csv, args.kind, out)
    print(f"wrote {out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "decompose": _cmd_decompose,
        "denoise-sim": _cmd_denoise,
        "cocluster-sim": _cmd_cocluster,
        "bounds-audit": _cmd_audit,
        "lower-bound": _cmd_lower_bound,
        "plot": _cmd_plot,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"tuckerkit: error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except OSError as exc:
        print(f"tuckerkit: i/o error: {exc}", file=sys.stderr)
        return IO_EXIT


if __name__ == "__main__":
    sys.exit(main())
