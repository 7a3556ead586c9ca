"""Outer iterations of the accelerated method vs Wolfe's major cycles on the whole cloud."""

import argparse

import numpy as np

from polyproj.bench import derive_seed, gen_compressed_cube
from polyproj.nearest import ProjectOptions, project
from polyproj.solvers import WolfeSolver


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, nargs="+", default=[3, 10, 50])
    ap.add_argument("--ell", type=int, nargs="+", default=[1000, 5000])
    ap.add_argument("--trials", type=int, default=5)
    args = ap.parse_args()
    for d in args.d:
        for ell in args.ell:
            outer, major = [], []
            for trial in range(args.trials):
                inst = gen_compressed_cube(d, ell, derive_seed(0, "nearest", d, ell, trial))
                X = inst.clouds[0]
                outer.append(project(inst.z, X, ProjectOptions(solver="wolfe")).outer_iterations)
                major.append(WolfeSolver(epsilon=1e-4).solve(inst.z, range(ell), X).stats.inner_iterations)
            print(f"d={d:<3} ell={ell:<6} meta outer {np.mean(outer):7.1f}   wolfe major cycles {np.mean(major):7.1f}")


if __name__ == "__main__":
    main()
