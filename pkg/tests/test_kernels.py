import os
import subprocess
import sys

import numpy as np
import pytest

import ggmwatch as gw
from ggmwatch import kernels


@pytest.fixture(scope="module")
def setup():
    om = gw.gen_chain_precision(20, 0.5)
    chol = gw.cholesky_factor(gw.invert_spd(om.entries))
    psi = gw.scale_matrix(om).entries
    rng = np.random.default_rng(7)
    return om.entries, chol, psi, rng


def test_backend_is_numba_by_default():
    assert kernels.BACKEND in ("numba", "numpy")
    if kernels.numba_available and os.environ.get("GGMWATCH_NUMBA", "1") != "0":
        assert kernels.BACKEND == "numba"


def test_window_paths_agree(setup):
    om, chol, psi, rng = setup
    xs = rng.standard_normal((30, 15, 20)) @ chol.T
    active = kernels.window_supnorms(xs, om, psi)
    fallback = kernels.window_supnorms_numpy(xs, om, psi)
    assert np.abs(active - fallback).max() <= 1e-9


def test_sliding_paths_agree(setup):
    om, chol, psi, rng = setup
    x = rng.standard_normal((300, 20)) @ chol.T
    active = kernels.sliding_supnorms(x, om, psi, 25)
    fallback = kernels.sliding_supnorms_numpy(x, om, psi, 25)
    assert len(active) == 300 - 25 + 1
    assert np.abs(active - fallback).max() <= 1e-9


def test_sliding_matches_full_recompute(setup):
    # the incremental scan agrees with the direct statistic on every window
    om, chol, psi, rng = setup
    x = rng.standard_normal((60, 20)) @ chol.T
    sup = kernels.sliding_supnorms(x, om, psi, 10)
    omat = gw.PrecisionMatrix.from_entries(np.array(om))
    for k in range(len(sup)):
        direct = gw.oracle_statistic(omat, gw.SampleWindow.from_samples(x[k : k + 10]))
        assert abs(sup[k] - direct.sup_norm) <= 1e-9


def test_window_matches_plugin_statistic(setup):
    om, chol, psi, rng = setup
    xs = rng.standard_normal((5, 12, 20)) @ chol.T
    sup = kernels.window_supnorms(xs, om, psi)
    for k in range(5):
        direct = gw.plugin_statistic(om, gw.SampleWindow.from_samples(xs[k]))
        assert abs(sup[k] - direct.sup_norm) <= 1e-9


def test_deterministic_repeat(setup):
    om, chol, psi, rng = setup
    xs = rng.standard_normal((10, 8, 20)) @ chol.T
    a = kernels.window_supnorms(xs, om, psi)
    b = kernels.window_supnorms(xs, om, psi)
    assert np.array_equal(a, b)


def test_short_path_rejected(setup):
    om, chol, psi, rng = setup
    with pytest.raises(ValueError):
        kernels.sliding_supnorms(np.zeros((4, 20)), om, psi, 10)


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, GGMWATCH_NUMBA="0")
    out = subprocess.run(
        [sys.executable, "-c", "from ggmwatch import kernels; print(kernels.BACKEND)"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "numpy"
