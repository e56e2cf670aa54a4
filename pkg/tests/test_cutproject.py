import json

import numpy as np
import pytest
from scipy import stats

from meyerlab import (
    Box,
    HullPoint,
    NotAReturnTime,
    TransversalPoint,
    WindowTooSmall,
    act,
    centered_box,
    hull_patch,
    internal_infimum_trace,
    intersection_window,
    model_set,
    predicted_density,
    predicted_intersection_density,
    sample_hull,
    sample_transversal,
    scheme_from_dict,
    scheme_to_dict,
)
from conftest import PHI, SQRT5, brute_model_points


class TestModelSet:
    def test_z2_is_integers(self, z2):
        z = TransversalPoint.of(z2, [0.0])
        patch = model_set(z2, z, Box([-5.0], [5.0]))
        assert patch.points.ravel().tolist() == list(range(-5, 5))

    def test_matches_brute_force(self, fib):
        z = TransversalPoint.of(fib, [0.1])
        patch = model_set(fib, z, centered_box(25.0, 1))
        ref = brute_model_points(fib, np.array([0.1]), 25.0)
        got = sorted(zip(map(tuple, patch.coeffs.tolist()),
                         map(tuple, np.round(patch.points, 9).tolist())))
        assert [c for c, _ in got] == [c for c, _ in ref]

    def test_density_counting_oracle(self, fib):
        """|Q_w cap [-T,T)| / 2T approaches vol(W)/covol."""
        z = TransversalPoint.of(fib, [0.0])
        t = 5000.0
        patch = model_set(fib, z, centered_box(t, 1))
        assert patch.size / (2.0 * t) == pytest.approx(
            predicted_density(fib), rel=1e-3)

    def test_boundary_w_rejected(self, fib):
        with pytest.raises(NotAReturnTime):
            TransversalPoint.of(fib, [fib.window.hi[0]])
        with pytest.raises(NotAReturnTime):
            TransversalPoint.of(fib, [5.0])

    def test_zero_in_every_model_set(self, fib):
        for w in (-0.9, 0.0, 0.3, 0.6):
            z = TransversalPoint.of(fib, [w])
            patch = model_set(fib, z, centered_box(5.0, 1))
            assert np.any(np.all(np.abs(patch.points) < 1e-12, axis=1))


class TestAct:
    def test_identity(self, fib):
        z = TransversalPoint.of(fib, [0.2])
        z2_ = act(fib, z, np.zeros(2, dtype=int))
        assert z2_.w == pytest.approx(z.w)

    def test_z2_exact_recurrence(self, z2):
        z = TransversalPoint.of(z2, [0.0])
        out = act(z2, z, np.array([5, 0]))
        assert out.w[0] == 0.0

    def test_fibonacci_small_step(self, fib):
        z = TransversalPoint.of(fib, [0.0])
        # gamma = (8, 13): p = 8 + 13 phi, star = 8 - 13/phi, |star| < 0.04
        out = act(fib, z, np.array([8, 13]))
        assert abs(out.w[0] - z.w[0]) < 0.04

    def test_non_return_rejected(self, fib):
        z = TransversalPoint.of(fib, [0.5])
        with pytest.raises(NotAReturnTime):
            act(fib, z, np.array([1, 0]))  # star = 1, exits the window


class TestPredicted:
    def test_densities(self, fib, z2, cubic):
        assert predicted_density(fib) == pytest.approx(PHI / SQRT5, rel=1e-12)
        assert predicted_density(z2) == 1.0
        assert predicted_density(cubic) == pytest.approx(4.0 / 7.0, rel=1e-12)

    def test_intersection_density_box_oracle(self, fib):
        za = TransversalPoint.of(fib, [0.0])
        zb = TransversalPoint.of(fib, [0.3])
        # (W - 0) cap (W - 0.3) = [-1, phi - 1 - 0.3)
        want = (PHI - 1.3 + 1.0) / SQRT5
        assert predicted_intersection_density(fib, [za, zb]) == pytest.approx(
            want, rel=1e-12)
        assert intersection_window(fib, [za, zb]).volume == pytest.approx(
            PHI - 0.3, rel=1e-12)

    def test_disjoint_translates_zero(self, z2):
        za = TransversalPoint.of(z2, [-0.4])
        zb = TransversalPoint.of(z2, [0.4])
        assert predicted_intersection_density(z2, [za, zb]) == pytest.approx(
            0.2, rel=1e-12)


class TestSampling:
    def test_transversal_margin_and_determinism(self, fib):
        a = sample_transversal(fib, 42, 0.1)
        b = sample_transversal(fib, 42, 0.1)
        assert np.array_equal(a.w, b.w)
        assert a.margin >= 0.1
        assert np.all(a.w >= fib.window.lo + 0.1) and np.all(a.w <= fib.window.hi - 0.1)

    def test_margin_too_wide(self, fib):
        with pytest.raises(WindowTooSmall):
            sample_transversal(fib, 1, 2.0)

    def test_hull_determinism(self, fib):
        x = sample_hull(fib, 7)
        y = sample_hull(fib, 7)
        assert np.array_equal(x.u, y.u) and np.array_equal(x.w, y.w)

    def test_hull_uniformity_chi2(self, fib):
        """Haar samples must be uniform in mirrored-lattice torus
        coordinates; 10x10 binning, chi-square at alpha = 1e-3."""
        from meyerlab.cutproject import _sample_hull_batch
        us, ws = _sample_hull_batch(fib, np.random.default_rng(123), 20000)
        mirror = fib.basis.matrix.copy()
        mirror[fib.d:] *= -1.0
        inv = np.linalg.inv(mirror)
        frac = (np.hstack([us, ws]) @ inv.T) % 1.0
        h, _, _ = np.histogram2d(frac[:, 0], frac[:, 1], bins=10,
                                 range=[[0, 1], [0, 1]])
        p = stats.chisquare(h.ravel()).pvalue
        assert p > 1e-3


class TestHullPoint:
    def test_reduce_patch_invariance(self, fib):
        """Reducing a representative must not change the patch it names."""
        rng = np.random.default_rng(3)
        region = centered_box(8.0, 1)
        for _ in range(20):
            u = rng.uniform(-50.0, 50.0, size=1)
            w = rng.uniform(-5.0, 5.0, size=1)
            a = hull_patch(fib, HullPoint(u, w), region)
            b = hull_patch(fib, HullPoint.reduce(fib, u, w), region)
            assert a.size == b.size
            assert np.allclose(a.points, b.points, atol=1e-9)

    def test_reduce_idempotent(self, fib):
        x = HullPoint.reduce(fib, np.array([17.3]), np.array([4.1]))
        y = HullPoint.reduce(fib, x.u, x.w)
        assert np.allclose(x.u, y.u, atol=1e-12) and np.allclose(x.w, y.w, atol=1e-12)

    def test_hull_patch_is_translated_model_set(self, fib):
        w = np.array([0.1])
        x = HullPoint(np.array([0.25]), w)
        a = hull_patch(fib, x, centered_box(10.0, 1))
        b = model_set(fib, TransversalPoint.of(fib, w), Box([-9.75], [10.25]))
        assert np.allclose(np.sort(a.points.ravel()),
                           np.sort(b.points.ravel() - 0.25), atol=1e-12)

    def test_zero_u_reduces_to_model_set(self, fib):
        w = np.array([0.3])
        a = hull_patch(fib, HullPoint(np.zeros(1), w), centered_box(10.0, 1))
        b = model_set(fib, TransversalPoint.of(fib, w), centered_box(10.0, 1))
        assert np.allclose(a.points, b.points, atol=1e-12)


class TestSchemeIO:
    def test_roundtrip(self, fib):
        d = scheme_to_dict(fib)
        again = scheme_from_dict(json.loads(json.dumps(d)))
        assert np.array_equal(again.basis.matrix, fib.basis.matrix)
        assert np.array_equal(again.window.lo, fib.window.lo)
        assert again.d == fib.d and again.m == fib.m

    def test_missing_key(self):
        with pytest.raises(KeyError):
            scheme_from_dict({"basis": [[1.0]]})


class TestInfimumTrace:
    def test_z2_exact_directions(self, z2):
        trace = internal_infimum_trace(z2, [10.0, 100.0])
        assert all(v == 0.0 for _, v in trace)

    def test_fibonacci_decreasing(self, fib):
        trace = internal_infimum_trace(fib, [10.0, 100.0, 1000.0])
        vals = [v for _, v in trace]
        assert vals[0] > vals[1] > vals[2] > 0.0
