import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from unload_rl import _kernels_py, kernels

try:
    from unload_rl import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

needs_ext = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")


def vectors(n, seed):
    rng = np.random.default_rng(seed)
    return [rng.normal(size=n) for _ in range(4)]


@needs_ext
@settings(max_examples=50, deadline=None)
@given(n=st.integers(0, 300), seed=st.integers(0, 10**6), t=st.integers(1, 1000))
def test_adam_backends_bit_identical(n, seed, t):
    p, g, m, v = vectors(n, seed)
    v = np.abs(v)
    args = (1e-4, 0.9, 0.999, 1e-8, 1 - 0.9**t, 1 - 0.999**t)
    a = [x.copy() for x in (p, g, m, v)]
    b = [x.copy() for x in (p, g, m, v)]
    compiled.adam_step(*a, *args)
    _kernels_py.adam_step(*b, *args)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


@needs_ext
@settings(max_examples=50, deadline=None)
@given(n=st.integers(0, 300), seed=st.integers(0, 10**6), zeta=st.floats(1e-4, 0.999))
def test_polyak_backends_bit_identical(n, seed, zeta):
    t, o, _, _ = vectors(n, seed)
    a, b = t.copy(), t.copy()
    compiled.polyak(a, o, zeta)
    _kernels_py.polyak(b, o, zeta)
    assert np.array_equal(a, b)


def test_adam_matches_textbook():
    p, g, m, v = vectors(50, 1)
    v = np.abs(v)
    lr, b1, b2, eps, t = 1e-3, 0.9, 0.999, 1e-8, 3
    m2 = b1 * m + (1 - b1) * g
    v2 = b2 * v + (1 - b2) * g * g
    expect = p - lr * (m2 / (1 - b1**t)) / (np.sqrt(v2 / (1 - b2**t)) + eps)
    kernels.adam_step(p, g, m, v, lr, b1, b2, eps, 1 - b1**t, 1 - b2**t)
    np.testing.assert_allclose(m, m2, rtol=1e-15)
    np.testing.assert_allclose(v, v2, rtol=1e-15)
    np.testing.assert_allclose(p, expect, rtol=1e-14)


def test_polyak_matches_formula():
    t, o, _, _ = vectors(100, 2)
    expect = 0.995 * t + 0.005 * o
    kernels.polyak(t, o, 0.005)
    assert np.all(np.abs(t - expect) <= np.abs(np.spacing(expect)))


@needs_ext
def test_length_mismatch_rejected():
    with pytest.raises(ValueError):
        compiled.polyak(np.zeros(3), np.zeros(4), 0.1)


def test_pure_fallback_selected_by_env():
    env = dict(os.environ, UNLOAD_RL_PURE="1")
    out = subprocess.run(
        [sys.executable, "-c", "from unload_rl import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


@needs_ext
def test_compiled_backend_is_default():
    if os.environ.get("UNLOAD_RL_PURE"):
        pytest.skip("fallback forced")
    assert kernels.BACKEND == "cython"
