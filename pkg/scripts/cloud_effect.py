"""Temperature profiles with and without the refractive cloud slab.

    python scripts/cloud_effect.py --kappa 0.5 --eps 0.01 --out results/cloud
"""
import argparse
from pathlib import Path

import numpy as np

from sourceiter.solver import AtmosphereScenario, Boundary, KappaModel, solve, to_celsius


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kappa", type=float, default=0.5)
    ap.add_argument("--eps", type=float, default=0.01)
    ap.add_argument("--nz", type=int, default=100)
    ap.add_argument("--out", type=Path, default=Path("results/cloud"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    runs = {}
    for eps in (0.0, args.eps):
        sc = AtmosphereScenario.default(KappaModel.constant(args.kappa), eps=eps, nz=args.nz,
                                        boundary=Boundary(c_S=0.0))
        runs[eps] = solve(sc)
    z = runs[0.0].scenario.z_grid
    clear, cloud = (to_celsius(runs[e].state.T) for e in (0.0, args.eps))
    np.savetxt(args.out / "profiles.txt", np.column_stack([z, clear, cloud]), fmt="%.8e",
               header=f"z T_clear_C T_cloud_C  kappa={args.kappa} eps={args.eps}")
    slab = (z > 0.5) & (z < 0.7)
    print(f"mean over the slab: clear {clear[slab].mean():.2f} C, cloud {cloud[slab].mean():.2f} C")
    print(f"largest change {np.max(np.abs(cloud - clear)):.2f} K at z={z[np.argmax(np.abs(cloud - clear))]:.2f}")


if __name__ == "__main__":
    main()
