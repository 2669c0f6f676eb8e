#!/usr/bin/env python3
"""Shock-tube error study: numerical profiles against the exact fan.

Runs the two-state collision on a fine 1D grid for each stiffness value,
prints the L1 errors, and writes numerical/exact profile CSVs for plotting.
"""

import argparse
from pathlib import Path

import numpy as np

from congested_euler import output, scenarios
from congested_euler.pressure import PressureLaw
from congested_euler.riemann import solve_riemann
from congested_euler.scenarios import Scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nx", type=int, default=1000)
    ap.add_argument("--t-end", type=float, default=0.1)
    ap.add_argument("--eps", type=float, nargs="+", default=[1e-2, 1e-4])
    ap.add_argument("--scheme", choices=("zq", "sl"), default="zq")
    ap.add_argument("--out", type=Path, default=Path("out/shock_tube"))
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    left, right = scenarios.riemann_states()
    for eps in args.eps:
        s = Scenario(
            kind="riemann1d",
            nx=args.nx,
            scheme=args.scheme,
            order=2,
            time_order=1 if args.scheme == "zq" else None,
            epsilon=eps,
            t_end=args.t_end,
        )
        res = scenarios.run_scenario(s)
        fan = solve_riemann(left, right, PressureLaw(eps, s.alpha, s.gamma))
        prof = fan.sample_profile(res.grid.centers_x, args.t_end)
        print(f"eps={eps:g}:")
        for name in ("rho", "q1", "Z", "rho_star"):
            err = float(np.sum(np.abs(getattr(res.final, name) - prof[name]))
                        * res.grid.dx)
            print(f"  L1 {name:8s} {err:.3e}")
        tag = f"eps{eps:g}"
        output.write_frame(res.final, res.grid, args.out / f"numeric_{tag}.csv")
        np.savetxt(
            args.out / f"exact_{tag}.csv",
            np.column_stack([res.grid.centers_x, prof["rho"], prof["q1"],
                             prof["Z"], prof["rho_star"]]),
            delimiter=",",
            header="x,rho,q1,Z,rho_star",
            comments="",
        )
    print(f"profiles written to {args.out}")


if __name__ == "__main__":
    main()
