"""Print the outer-loop traces of the two small planar examples."""

import numpy as np

from polyproj.nearest import ProjectOptions, project
from polyproj.solvers import wolfe_min_norm

WORKED = np.array([(0.0, 4.0), (0.0, 2.0), (2.0, 2.0), (-2.0, 1.0)])
EXCHANGE_CLOUD = np.array([(2.0, 2.0), (3.0, 1.0), (1.0, 1.0), (-1.0, 1.0)])


def show(name, pts):
    print(f"== {name}: z = 0, I_0 = (0, 1, 2)")
    for solver in ("wolfe", "mdm", "qp", "oracle"):
        rep = project(np.zeros(2), pts, ProjectOptions(solver=solver, init=(0, 1, 2), trace=True))
        print(f"  {solver:<7} y = {np.round(rep.projection, 10)}  weights {rep.coeffs_global.as_dict()}")
        for rec in rep.trace:
            print(f"          n={rec['n']} I={rec['I']} theta={rec['theta']:.6f} worst={rec['worst_value']:.3e}")


if __name__ == "__main__":
    show("worked example", WORKED)
    print(f"  exact optimum (-6/17, 24/17) = {np.array([-6 / 17, 24 / 17])}")
    print("== Wolfe on the whole worked example: (corral, affine weights) per affine solve")
    _, _, _, hist = wolfe_min_norm(WORKED, record=True)
    for S, v in hist:
        print(f"  S={S} v={np.round(v, 6)}")
    show("exchange-rule example", EXCHANGE_CLOUD)
