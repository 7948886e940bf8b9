"""Command-line front end: ``pathwit <subcommand> [--config PATH] [--out PATH] [--alpha X] [--grid lo:hi:step]``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 solver non-convergence.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from .config import load_config, load_counts, parse_grid
from .errors import ConfigError, NonConvergenceError, PathWitError
from .experiments import run_bs_sweep, run_loss_sweep, run_n_scaling, run_tripartite, run_verdict

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_SOLVER = 0, 2, 3, 4

_RUNNERS = {
    "bs-sweep": run_bs_sweep,
    "loss-sweep": run_loss_sweep,
    "n-scaling": run_n_scaling,
    "tripartite": run_tripartite,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pathwit", description="Path-entanglement witness experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("bs-sweep", "witness and PPT bound against the splitting ratio"),
        ("loss-sweep", "witness and PPT bound against the overall transmission"),
        ("n-scaling", "W_N margins at the optimal displacement"),
        ("tripartite", "ideal and lossy three-path predictions"),
        ("verdict", "entanglement verdict from a counts file"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="key = value config file")
        p.add_argument("--out", type=Path, help="write output here instead of stdout")
        p.add_argument("--alpha", type=float, help="displacement amplitude")
        if name == "verdict":
            p.add_argument("counts", nargs="?", type=Path, help="counts file (or 'counts' in the config)")
        else:
            p.add_argument("--grid", help="sweep grid lo:hi:step")
    return parser


def _emit(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {out}: {exc}") from exc


def _run(args) -> int:
    overrides = {"experiment": args.command, "alpha": args.alpha}
    if getattr(args, "grid", None):
        overrides["grid"] = parse_grid(args.grid)
    cfg = load_config(args.config, **overrides)
    out = args.out if args.out is not None else (Path(cfg.output) if cfg.output else None)
    if args.command == "verdict":
        path = args.counts or (Path(cfg.counts) if cfg.counts else None)
        if path is None:
            raise ConfigError("verdict needs a counts file")
        verdict = run_verdict(load_counts(path), args.alpha)
        _emit(verdict.report(), out)
        return EXIT_OK
    table = _RUNNERS[args.command](cfg)
    _emit(table.to_csv(), out)
    for note in table.notes:
        print(f"# {note}", file=sys.stderr)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except PathWitError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
