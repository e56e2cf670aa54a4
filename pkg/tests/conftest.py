"""Shared fixtures and independent oracles.

The brute-force helpers below deliberately use plain nested Python loops
and their own coefficient bounds so they share no code with the library's
enumeration; they are the reference the fast paths are checked against.
"""

import math
from pathlib import Path

import numpy as np
import pytest

import meyerlab
from meyerlab import load_scheme

FIXTURES = Path(meyerlab.__file__).parent / "fixtures"

PHI = (1.0 + math.sqrt(5.0)) / 2.0
SQRT5 = math.sqrt(5.0)


@pytest.fixture(scope="session")
def fib():
    return load_scheme(FIXTURES / "fibonacci.json")


@pytest.fixture(scope="session")
def z2():
    return load_scheme(FIXTURES / "z2.json")


@pytest.fixture(scope="session")
def cubic():
    return load_scheme(FIXTURES / "cubic.json")


def coeff_bound(matrix: np.ndarray, corners: np.ndarray) -> int:
    """Sup-norm bound on integer coefficients of lattice points inside the
    box spanned by the given corner rows (via the inverse basis)."""
    inv = np.linalg.inv(matrix)
    return int(math.ceil(max(abs(float(v)) for c in corners for v in inv @ c))) + 1


def brute_model_points(scheme, w, t):
    """Nested-loop model set on [-t, t)^d: every integer combination is
    tried, membership is the raw half-open test."""
    mtx = scheme.basis.matrix
    n = mtx.shape[0]
    d, m = scheme.d, scheme.m
    lo = np.concatenate([np.full(d, -t), scheme.window.lo - np.asarray(w)])
    hi = np.concatenate([np.full(d, t), scheme.window.hi - np.asarray(w)])
    corners = np.array([[lo[k] if (i >> k) & 1 else hi[k] for k in range(n)]
                        for i in range(1 << n)])
    bound = coeff_bound(mtx, corners)
    out = []
    for c in np.ndindex(*([2 * bound + 1] * n)):
        coeffs = np.array(c) - bound
        x = mtx @ coeffs
        phys, internal = x[:d], x[d:]
        if np.all(phys >= -t) and np.all(phys < t) and \
           np.all(internal + w >= scheme.window.lo) and \
           np.all(internal + w < scheme.window.hi):
            out.append((tuple(coeffs.tolist()), tuple(phys.tolist())))
    out.sort()
    return out


def brute_periodize(scheme, f, x, pad=2.0):
    """Double/triple loop evaluation of (Tf)(x) = sum over gamma of
    f(u - p(gamma), w + gamma*)."""
    mtx = scheme.basis.matrix
    n = mtx.shape[0]
    d = scheme.d
    g_lo = x.u - f.support_g.hi - pad
    g_hi = x.u - f.support_g.lo + pad
    w_lo = np.maximum(f.support_w.lo, scheme.window.lo) - x.w - pad
    w_hi = np.minimum(f.support_w.hi, scheme.window.hi) - x.w + pad
    lo = np.concatenate([g_lo, w_lo])
    hi = np.concatenate([g_hi, w_hi])
    corners = np.array([[lo[k] if (i >> k) & 1 else hi[k] for k in range(n)]
                        for i in range(1 << n)])
    bound = coeff_bound(mtx, corners)
    total = 0.0
    for c in np.ndindex(*([2 * bound + 1] * n)):
        coeffs = np.array(c) - bound
        pt = mtx @ coeffs
        h = x.u - pt[:d]
        w = x.w + pt[d:]
        if np.all(w >= scheme.window.lo) and np.all(w < scheme.window.hi) and \
           f.support_g.contains(h[None, :])[0] and \
           f.support_w.contains(w[None, :])[0]:
            total += float(f.evaluator(h[None, :], w[None, :])[0])
    return total


def adjacent_gap_scan(points: np.ndarray) -> float:
    """1-d minimum nearest-neighbor distance by sorting, no trees."""
    xs = np.sort(points.ravel())
    return float(np.min(np.diff(xs)))
