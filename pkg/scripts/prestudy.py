"""Coarse alpha sweep whose output calibrates the phase-transition gates.

Runs n=128, T=0.5 with three alphas on each side of 1 and writes
tests/fixtures/prestudy_n128.csv.  Rerun only when the solver changes; the
acceptance suite reads the committed file.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from slowbond.config import parse_config
from slowbond.csvio import open_output, write_csv
from slowbond.experiments import SweepRow, phase_transition_gates, sweep_alpha

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "prestudy_n128.csv"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--output", default=str(DEFAULT_OUT))
    args = ap.parse_args(argv)
    spec = parse_config(overrides=dict(
        experiment="sweep-alpha", n=128, T=0.5, dt=1e-5, snapshot_stride=100,
        profile="halfcos", alphas="0.001,0.01,0.1,10,100,1000"))
    res = sweep_alpha(spec)
    gates = phase_transition_gates(res)
    meta = spec.metadata()
    meta["neumann_periodic_distance"] = res.neumann_periodic_distance
    meta["neumann_ratio"] = gates["neumann_ratio"]
    meta["periodic_ratio"] = gates["periodic_ratio"]
    with open_output(args.output) as out:
        write_csv(out, meta, SweepRow.HEADER, (r.cells() for r in res.rows))
    for key, val in gates.items():
        print(f"{key}: {val}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
