"""Command-line entry point.

Subcommands mirror the experiments; every flag is a RunSpec key in kebab
case and overrides the optional ``--config`` file.  Output is CSV with a
``# key=value`` prologue, to ``--output`` or stdout.  On failure one line
``error[<category>]: <message>`` goes to stderr and the exit code is
nonzero (2 for configuration errors, 1 otherwise).
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import fields

from . import __version__
from .config import ConfigError, RunSpec, parse_config
from .csvio import open_output, write_csv
from .grid import field_row
from .ssep import PRNG_NAME, boxcar_averages

SUBCOMMANDS = ("solve", "sweep-alpha", "simulate", "hydro-compare", "green-check", "energy")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slowbond", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value file")
        for f in fields(RunSpec):
            if f.name == "experiment":
                continue
            p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None, metavar="VALUE")
    return parser


def _metadata(spec: RunSpec, **extra) -> dict:
    meta = {"package": "slowbond", "version": __version__}
    meta.update(spec.metadata())
    meta.update(extra)
    return meta


def run(spec: RunSpec) -> None:
    from . import experiments as ex

    with open_output(spec.output) as out:
        if spec.experiment == "solve":
            traj = ex.solve_run(spec)
            header = ["t"] + [f"v{x}" for x in range(spec.n)]
            write_csv(out, _metadata(spec), header, (field_row(fr) for fr in traj))
        elif spec.experiment == "sweep-alpha":
            res = ex.sweep_alpha(spec)
            write_csv(out, _metadata(spec, neumann_periodic_distance=res.neumann_periodic_distance),
                      ex.SweepRow.HEADER, (r.cells() for r in res.rows))
        elif spec.experiment == "energy":
            reps = ex.energy_sweep(spec)
            write_csv(out, _metadata(spec), ("alpha", "bulk", "atom", "total", "bound_check"),
                      (r.row() for r in reps))
        elif spec.experiment == "green-check":
            rows = ex.green_check(spec)
            write_csv(out, _metadata(spec), ex.GreenRow.HEADER, (r.cells() for r in rows))
        elif spec.experiment == "simulate":
            stats = ex.simulate_run(spec)
            boxes = [boxcar_averages(m, spec.epsilon) for m in stats.mean]
            meta = _metadata(spec, prng=PRNG_NAME, conserved=stats.conserved,
                             boxcar_left=[b[0] for b in boxes], boxcar_right=[b[1] for b in boxes])
            if spec.long_form:
                rows = ((r, t, x, int(s[k, x]))
                        for r, s in enumerate(stats.replica_snapshots)
                        for k, t in enumerate(stats.times) for x in range(spec.n))
                write_csv(out, meta, ("replica", "t", "x", "eta"), rows)
            else:
                write_csv(out, meta, ("t", "x", "mean", "stderr"), stats.rows())
        elif spec.experiment == "hydro-compare":
            rows = ex.hydro_compare(spec)
            write_csv(out, _metadata(spec, prng=PRNG_NAME), ex.HydroRow.HEADER, (r.cells() for r in rows))
        else:  # parse_config has already rejected anything else
            raise ConfigError("experiment", f"unknown experiment {spec.experiment!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    config = args.pop("config")
    try:
        spec = parse_config(config, args)
    except ConfigError as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return 2
    try:
        run(spec)
    except (ValueError, ArithmeticError) as exc:
        print(f"error[numeric]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"error[runtime]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
