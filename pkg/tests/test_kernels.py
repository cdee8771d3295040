"""Kernel backends: cubic root finder and per-mode solve, compiled vs pure Python."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csicomp import _kernels
from csicomp._kernels import _pykernels

BACKENDS = _kernels.available_backends()


@pytest.fixture(params=BACKENDS)
def backend(request):
    _kernels.use_backend(request.param)
    yield request.param
    _kernels.use_backend(BACKENDS[-1])


def _roots_via_numpy(a3, a2, a1, a0):
    coeffs = np.array([a3, a2, a1, a0])
    nz = np.nonzero(np.abs(coeffs) > 0)[0]
    if nz.size == 0:
        return []
    roots = np.roots(coeffs[nz[0] :])
    return sorted(float(r.real) for r in roots if abs(r.imag) <= 1e-8 * max(1.0, abs(r)))


def test_cubic_roots_simple(backend):
    # (x-1)(x-2)(x-3) = x^3 - 6x^2 + 11x - 6
    roots = _kernels.cubic_roots(1.0, -6.0, 11.0, -6.0)
    assert np.allclose(roots, [1.0, 2.0, 3.0], rtol=1e-12)
    # single real root: x^3 + x + 1
    roots = _kernels.cubic_roots(1.0, 0.0, 1.0, 1.0)
    assert len(roots) == 1
    x = roots[0]
    assert abs(x**3 + x + 1.0) < 1e-12


def test_cubic_roots_degenerate(backend):
    # quadratic: x^2 - 1
    assert np.allclose(_kernels.cubic_roots(0.0, 1.0, 0.0, -1.0), [-1.0, 1.0])
    # linear
    assert np.allclose(_kernels.cubic_roots(0.0, 0.0, 2.0, -4.0), [2.0])
    # no real roots: x^2 + 1
    assert _kernels.cubic_roots(0.0, 1.0, 0.0, 1.0) == []
    # all zero
    assert _kernels.cubic_roots(0.0, 0.0, 0.0, 0.0) == []


def test_cubic_roots_random_vs_numpy(backend):
    rng = np.random.default_rng(42)
    for _ in range(300):
        c = rng.normal(0, 10, size=4)
        ours = _kernels.cubic_roots(*c)
        ref = _roots_via_numpy(*c)
        assert len(ours) in (len(ref), len(ref) - 2, len(ref) + 2) or len(ours) == len(ref)
        # every root we report must actually be a root
        for x in ours:
            val = ((c[0] * x + c[1]) * x + c[2]) * x + c[3]
            scale = max(abs(c[0]) * abs(x) ** 3, abs(c[1]) * x * x, abs(c[2]) * abs(x), abs(c[3]), 1e-30)
            assert abs(val) <= 1e-9 * scale


@given(
    st.floats(min_value=-100, max_value=100),
    st.floats(min_value=-100, max_value=100),
    st.floats(min_value=-100, max_value=100),
)
@settings(max_examples=200, deadline=None)
def test_cubic_roots_recover_constructed(r1, r2, r3):
    # build a cubic from known roots and recover them
    a2 = -(r1 + r2 + r3)
    a1 = r1 * r2 + r1 * r3 + r2 * r3
    a0 = -(r1 * r2 * r3)
    got = _pykernels.cubic_roots(1.0, a2, a1, a0)
    want = sorted([r1, r2, r3])
    assert len(got) >= 1
    # repeated roots are ill-conditioned (error ~ eps^(1/3)), so keep this loose
    span = max(1.0, max(abs(v) for v in want))
    assert min(abs(g - w) for g in got for w in want) <= 2e-3 * span


def test_backend_parity_solve():
    if "cython" not in BACKENDS:
        pytest.skip("compiled kernels unavailable")
    rng = np.random.default_rng(3)
    for _ in range(200):
        n = rng.integers(1, 9)
        lam = 10.0 ** rng.uniform(-3, 3, n)
        lam_b = lam * 10.0 ** rng.normal(0, 0.8, n)
        mu = float(10.0 ** rng.uniform(-6, 2))
        d_py, r_py, e_py = _pykernels.allocate_at_mu(lam, lam_b, mu)
        _kernels.use_backend("cython")
        d_cy, r_cy, e_cy = _kernels.allocate_at_mu(lam, lam_b, mu)
        for a, b in ((d_py, d_cy), (r_py, r_cy), (e_py, e_cy)):
            both_inf = np.isinf(a) & np.isinf(b)
            close = np.isclose(a, b, rtol=1e-12, atol=1e-300)
            assert np.all(both_inf | close), (lam, lam_b, mu, a, b)


def test_mu_zero_returns_guard(backend):
    lam = np.array([2.0, 0.5])
    lam_b = np.array([1.0, 3.0])
    d, r, e = _kernels.allocate_at_mu(lam, lam_b, 0.0, 1e-12)
    assert np.allclose(d, 1e-12 * lam)
    assert np.all(r > 30.0)  # essentially distortion-free, huge rate


def test_huge_mu_switches_everything_off(backend):
    lam = np.array([1.0, 4.0])
    lam_b = np.array([2.0, 4.0])
    d, r, e = _kernels.allocate_at_mu(lam, lam_b, 1e9)
    assert np.all(np.isinf(d))
    assert np.all(r == 0.0)
    assert np.allclose(e, lam)


def test_rate_distortion_outputs_consistent(backend):
    from csicomp.distortion import mode_distortions, mode_rates

    rng = np.random.default_rng(11)
    lam = 10.0 ** rng.uniform(-2, 2, 6)
    lam_b = lam * 10.0 ** rng.normal(0, 0.5, 6)
    d, r, e = _kernels.allocate_at_mu(lam, lam_b, 0.3)
    assert np.allclose(r, mode_rates(lam, d), rtol=1e-12)
    assert np.allclose(e, mode_distortions(lam, lam_b, d), rtol=1e-12)
