import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polariton_transfer import kernels
from polariton_transfer.core import build_chain, build_ring
from polariton_transfer.dynamics import spectral_decompose

try:
    kernels.get_backend("cython")
    HAVE_CYTHON = True
except ImportError:
    HAVE_CYTHON = False

needs_cython = pytest.mark.skipif(not HAVE_CYTHON, reason="compiled extension not built")


def setup(graph):
    dec = spectral_decompose(graph)
    V = np.ascontiguousarray(dec.eigenvectors)
    w = np.ascontiguousarray(dec.eigenvalues)
    return V, w, V[graph.s, :].astype(np.complex128)


def test_backend_flag():
    assert kernels.BACKEND in ("cython", "python")
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@needs_cython
@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30), st.lists(st.floats(0.0, 5.0), min_size=1, max_size=80), st.floats(0.1, 1.0))
def test_measure_rounds_agree(n, dts, target):
    g = build_chain(n, 0.8)
    V, w, c = setup(g)
    dts = np.array(dts)
    py = kernels.get_backend("python")[0](V, w, c, g.r, dts, target, 0.0)
    cy = kernels.get_backend("cython")[0](V, w, c, g.r, dts, target, 0.0)
    assert py[-1] == cy[-1]
    for a, b in zip(py[:-1], cy[:-1]):
        assert np.allclose(a, b, atol=1e-12)


@needs_cython
@pytest.mark.parametrize("m", [1, 255, 256, 257, 3000])
def test_profile_agrees(m):
    g = build_ring(11, receiver=5)
    V, w, c = setup(g)
    vr = np.ascontiguousarray(V[g.r, :])
    py = kernels.get_backend("python")[1](vr, c, w, 0.013, m)
    cy = kernels.get_backend("cython")[1](vr, c, w, 0.013, m)
    assert np.allclose(py, cy, atol=1e-12)


def test_does_not_mutate_input():
    g = build_chain(5)
    V, w, c = setup(g)
    before = c.copy()
    kernels.measure_rounds(V, w, c, g.r, np.full(5, 1.0), 2.0, 0.0)
    assert np.array_equal(c, before)


def test_stops_at_target():
    g = build_chain(2)
    V, w, c = setup(g)
    f, p, cum, rem, c_out, done = kernels.measure_rounds(V, w, c, g.r, np.full(10, np.pi / 2), 0.5, 0.0)
    assert done == 1 and cum[0] == pytest.approx(1.0) and rem[0] == pytest.approx(0.0, abs=1e-15)


def test_pure_python_override():
    import os
    import subprocess
    import sys

    env = dict(os.environ, POLARITON_TRANSFER_PURE="1")
    out = subprocess.run([sys.executable, "-c", "import polariton_transfer as p; print(p.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
