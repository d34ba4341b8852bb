"""The numba and numpy kernel flavours agree, and the backend flag is honoured."""
from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from artifact import _kernels as K


@given(st.integers(0, 30), st.floats(0.1, 6.0), st.integers(0, 2 ** 32 - 1))
def test_gegenbauer_flavours_agree(degree, order, seed):
    x = np.random.default_rng(seed).uniform(-1, 1, 17)
    a = K.gegenbauer_array_numba(degree, order, x)
    b = K.gegenbauer_array_numpy(degree, order, x)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(b, special.eval_gegenbauer(degree, order, x), rtol=1e-10,
                               atol=1e-10)


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([(2.0, 1.0), (2.0, 2.0), (4.0, 2.0),
                                                      (3.0, 1.5), (4.0, 3.0)]))
def test_step_seminorm_flavours_agree(seed, pq):
    rng = np.random.default_rng(seed)
    vals = np.sort(rng.uniform(0, 5, 12))[::-1].copy()
    meas = rng.uniform(0.01, 2.0, 12)
    p, q = pq
    a = K.step_seminorm_numba(vals, meas, p, q)
    b = K.step_seminorm_numpy(vals, meas, p, q)
    assert a == pytest.approx(b, rel=1e-12)


def test_step_seminorm_single_step():
    # constant c on measure M: |f|_{p,q} = c (p/q)^{1/q} M^{1/p}
    for fn in (K.step_seminorm_numba, K.step_seminorm_numpy):
        assert fn(np.array([3.0]), np.array([4.0]), 2.0, 1.0) == pytest.approx(12.0, rel=1e-15)


@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 6))
def test_ladder_flavours_agree(seed, m):
    rng = np.random.default_rng(seed)
    coefs = rng.standard_normal(m // 2 + 1)
    xd = rng.uniform(-1, 1, 9)
    s = rng.uniform(0, 1, 9)
    np.testing.assert_allclose(K.ladder_partials_numba(coefs, m, xd, s),
                               K.ladder_partials_numpy(coefs, m, xd, s), rtol=1e-12, atol=1e-12)


def test_ladder_partials_finite_differences():
    coefs = np.array([1.0, -2.0, 0.5])
    m = 4
    xd, s = np.array([0.3]), np.array([0.7])
    h = 1e-6
    out = K.ladder_partials_numpy(coefs, m, xd, s)
    gx = (K.ladder_partials_numpy(coefs, m, xd + h, s)[0] - K.ladder_partials_numpy(coefs, m, xd - h, s)[0]) / (2 * h)
    gs = (K.ladder_partials_numpy(coefs, m, xd, s + h)[0] - K.ladder_partials_numpy(coefs, m, xd, s - h)[0]) / (2 * h)
    assert out[1, 0] == pytest.approx(gx[0], abs=1e-8)
    assert out[2, 0] == pytest.approx(gs[0], abs=1e-8)


def test_active_backend_matches_flag():
    assert K.backend() in ("numba", "numpy")
    assert (K.backend() == "numba") == K.USE_NUMBA


@pytest.mark.parametrize("flag, expected", [("0", "numpy"), ("off", "numpy")])
def test_env_flag_selects_numpy(flag, expected):
    env = dict(os.environ, ARTIFACT_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "from artifact._kernels import backend; print(backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected


@pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba is not installed")
def test_env_flag_default_uses_numba():
    env = {k: v for k, v in os.environ.items() if k != "ARTIFACT_NUMBA"}
    out = subprocess.run([sys.executable, "-c", "from artifact._kernels import backend; print(backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numba"
