import numpy as np
import pytest

from fastdpc.core import DpcParams
from fastdpc.datasets import generate_gaussian


def random_points(seed, n, d, scale=1000.0):
    return np.random.default_rng(seed).uniform(0.0, scale, (n, d))


def blobs(seed, k=4, n=600, d=2, spread=600.0, separation=20000.0):
    points, truth, _ = generate_gaussian(k, n, d, spread, seed=seed, min_separation=separation)
    return points, truth


@pytest.fixture(scope="session", autouse=True)
def _compile_kernels():
    # Trigger numba compilation (or cache load) once, up front.
    from fastdpc import approx_dpc_run, exdpc_run, s_approx_run

    X = random_points(0, 200, 2)
    p = DpcParams(d_cut=80.0, delta_min=200.0, epsilon=0.5)
    for run in (exdpc_run, approx_dpc_run, s_approx_run):
        run(X, p)
        run(X, DpcParams(d_cut=80.0, delta_min=200.0, epsilon=0.5, threads=2))
