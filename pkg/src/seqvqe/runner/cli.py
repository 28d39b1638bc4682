"""Command-line entry point: ``seqvqe <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..errors import SeqVQEError
from .config import MODES, load_config
from .pipelines import COMMANDS


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI configuration file")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", type=Path, help="output directory (default from config)")
    common.add_argument("--workers", type=int, help="worker processes")
    common.add_argument("--mode", choices=MODES, help="exact expectations or finite shots")
    common.add_argument("--no-plots", action="store_true", help="skip PNG rendering")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="seqvqe",
        description="Sequential two-qubit VQE for the transverse-field Ising ring.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "exact": "exact ground energies over the (M, J) grid",
        "vqe": "SPSA optimisation at one (M, J) with learning curves",
        "sweep": "noisy, mitigated and noise-free VQE over the (M, J) grid",
        "zne-study": "optimised energy versus noise scale and extrapolations",
        "rate-check": "effective damping checks for the transient-level and injection models",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(
            args.config,
            seed=args.seed,
            workers=args.workers,
            sampling__mode=args.mode,
        )
        out_dir = args.out if args.out is not None else Path(cfg.output.directory)
        plots = cfg.output.plots and not args.no_plots
        result = COMMANDS[args.command](cfg, out_dir=out_dir, plots=plots)
    except SeqVQEError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for table in result.tables:
        print(f"wrote {out_dir / table.name} ({len(table.rows)} rows)")
    print(f"manifest {result.manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
