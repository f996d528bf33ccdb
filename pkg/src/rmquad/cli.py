"""Command-line entry point: ``rmquad --experiment convergence --thickness 1e-4``.

Exit codes: 0 success, 2 configuration error, 3 solver error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import EXPERIMENTS, ConfigError, build_config, read_config_file
from .experiments import RUNNERS
from .mapping import InvalidElementError
from .mesh import MeshError
from .solver import SolverError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3

log = logging.getLogger("rmquad")


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rmquad",
        description="Reissner-Mindlin plate experiments on quadrilateral meshes (CSV output).",
    )
    p.add_argument("--config", help="key=value config file; flags override its entries")
    p.add_argument("--experiment", choices=EXPERIMENTS)
    p.add_argument("--mesh", help="trapezoid:LEVELS:DISTORTION | perturbed:N:JITTER:SEED | file:PATH")
    p.add_argument("--thickness", "-t", action="append", type=float,
                   help="plate thickness; repeat for a sweep")
    p.add_argument("--E", type=float, help="Young's modulus in Pa (default 180e9)")
    p.add_argument("--nu", type=float, help="Poisson ratio (default 0.3)")
    p.add_argument("--shear-correction", dest="k_shear", type=float, help="shear correction factor (default 5/6)")
    p.add_argument("--gamma", type=float, help="interior penalty parameter (default 10)")
    p.add_argument("--variant", choices=["covariant", "parametric"])
    p.add_argument("--levels", type=int, help="number of trapezoid levels")
    p.add_argument("--distortion", type=float, help="trapezoid distortion in [0, 0.45)")
    p.add_argument("--pattern", choices=["self-similar", "checkerboard"], help="trapezoid vertex pattern")
    p.add_argument("--seed", type=int, help="seed of the perturbed mesh")
    p.add_argument("--zero-load", dest="zero_load", action="store_const", const=True,
                   help="single-solve with g = 0")
    p.add_argument("--dump", help="single-solve: write 'x y u' per displacement node")
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        values = read_config_file(args.config) if args.config else {}
        flags = {k: v for k, v in vars(args).items() if k not in ("config", "verbose") and v is not None}
        if "thickness" in flags:
            flags["thickness"] = tuple(flags["thickness"])
        values.update(flags)
        config = build_config(values)
    except (ConfigError, MeshError, ValueError) as exc:
        print(f"rmquad: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    log.info("running %s on %s", config.experiment, config.mesh)
    try:
        _, csv = RUNNERS[config.experiment](config)
    except (ConfigError, MeshError) as exc:
        print(f"rmquad: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, InvalidElementError, MemoryError) as exc:
        print(f"rmquad: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    if config.out:
        Path(config.out).write_text(csv)
    else:
        sys.stdout.write(csv)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
