"""Shared fixtures-by-import: instance builders and hypothesis strategies."""

import numpy as np
from hypothesis import strategies as st

WORKED = np.array([(0.0, 4.0), (0.0, 2.0), (2.0, 2.0), (-2.0, 1.0)])
WORKED_OPT = np.array([-6 / 17, 24 / 17])
EXCHANGE_CLOUD = np.array([(2.0, 2.0), (3.0, 1.0), (1.0, 1.0), (-1.0, 1.0)])


def simplex_only_cloud(d):
    """d+1 points with the origin in their hull but outside every d-subset's hull."""
    pts = np.zeros((d + 1, d))
    for i in range(d - 2):
        pts[i, i] = 1.0
        pts[i, -1] = -1.0
    pts[d - 2, :] = -1.0
    pts[d - 2, d - 2] = 1.0
    pts[d - 1, :] = -1.0
    pts[d, -1] = 1.0
    weights = np.r_[np.full(d - 2, 1 / (2 * (d - 1))), 1 / (4 * (d - 1)), 1 / (4 * (d - 1)), 0.5]
    return pts, weights


def random_instance(rng, d, ell, spread=2.0):
    return rng.normal(size=(ell, d)), rng.normal(size=d) * spread


@st.composite
def instances(draw, dims=(2, 3), sizes=(5, 12)):
    """A Gaussian cloud plus a query point, drawn from a hypothesis-controlled seed."""
    seed = draw(st.integers(0, 2**32 - 1))
    d = draw(st.sampled_from(dims))
    ell = draw(st.integers(*sizes))
    return random_instance(np.random.default_rng(seed), d, ell)


@st.composite
def pair_instances(draw, dims=(2, 3), max_size=8):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    d = draw(st.sampled_from(dims))
    ell = draw(st.integers(1, max_size))
    m = draw(st.integers(1, max_size))
    shift = rng.normal(size=d) * draw(st.sampled_from([0.0, 1.0, 3.0]))
    return rng.normal(size=(ell, d)), rng.normal(size=(m, d)) + shift


def no_repeats(visited):
    return len(set(visited)) == len(visited)


# criterion number -> printed PASS/FAIL line, filled in by the acceptance tests
ACCEPTANCE = {}
