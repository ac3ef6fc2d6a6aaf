"""Temperature change from extra opacity on the 14-18 micron band.

For each added level, both cases are solved and then iterated to the fixed
point, so the differences are free of the stopping error. Prints the ground
change and the altitude above which the atmosphere cools.

    python scripts/co2_effect.py --levels 0.05 0.1 0.15 0.2 --out results/co2
"""
import argparse
from pathlib import Path

import numpy as np

from sourceiter.scenario_io import RunConfig
from sourceiter.solver import TEMPERATURE_SCALE, build_operators, converge, solve


def fixed_point(cfg):
    sc = cfg.scenario()
    opts = cfg.solve_options()
    sol = solve(sc, opts, build_operators(sc, opts))
    return converge(sol.state, sc, sol.ops, tol=1e-10).T, sc.z_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=float, nargs="+", default=[0.05, 0.1, 0.15, 0.2])
    ap.add_argument("--cases", nargs="+", default=["case1", "case2"])
    ap.add_argument("--out", type=Path, default=Path("results/co2"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    for case in args.cases:
        cfg = RunConfig(case=case)
        cfg.solver.max_iter = 300
        base, z = fixed_point(cfg)
        cols, names = [z], ["z"]
        for level in args.levels:
            cfg.co2.level = level
            dT = (fixed_point(cfg)[0] - base) * TEMPERATURE_SCALE
            cross = z[np.argmax(dT < 0)] if np.any(dT < 0) else float("nan")
            print(f"{case} level={level:.3f}: dT(0)={dT[0]:+.3f} K  cooler above z={cross:.2f}  "
                  f"range [{dT.min():+.3f}, {dT.max():+.3f}] K")
            cols.append(dT)
            names.append(f"dT_{level:g}")
        np.savetxt(args.out / f"{case}_dT.txt", np.column_stack(cols), fmt="%.8e", header=" ".join(names))


if __name__ == "__main__":
    main()
