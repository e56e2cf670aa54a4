import numpy as np
import pytest

from meyerlab import (
    Box,
    HullPoint,
    InjectivityViolated,
    TransversalPoint,
    add_fns,
    box_indicator_fn,
    centered_box,
    change_of_section_check,
    estimate_transverse_measure,
    injective_probe_bound,
    nk_separation,
    periodize,
    shift_fn,
    stages_check,
    verify_transverse_identity,
)
from conftest import PHI, SQRT5, brute_periodize


def random_hull_points(scheme, seed, n):
    from meyerlab.cutproject import _sample_hull_batch
    us, ws = _sample_hull_batch(scheme, np.random.default_rng(seed), n)
    return [HullPoint(us[i], ws[i]) for i in range(n)]


class TestPeriodize:
    def test_matches_brute_force(self, fib):
        f = box_indicator_fn(Box([-1.5], [2.0]), Box([-0.8], [0.2]), value=1.0)
        for x in random_hull_points(fib, 11, 10):
            assert periodize(fib, f, x) == brute_periodize(fib, f, x)

    def test_matches_brute_force_cubic(self, cubic):
        f = box_indicator_fn(Box([-2.0], [2.0]), Box([-0.5, -0.5], [0.5, 0.8]),
                             value=0.75)
        for x in random_hull_points(cubic, 13, 5):
            assert periodize(cubic, f, x) == brute_periodize(cubic, f, x)

    def test_indicator_of_injective_box_is_indicator(self, fib):
        """With physical support smaller than the patch gap, the periodized
        indicator takes values in {0, 1} and flags exactly the hull points
        whose patch meets the box."""
        side = 0.9 * injective_probe_bound(fib)
        f = box_indicator_fn(centered_box(side / 2.0, 1), Box([-1.0], [PHI - 1.0]))
        values = [periodize(fib, f, x) for x in random_hull_points(fib, 29, 100)]
        assert set(values) <= {0.0, 1.0}
        assert 0.0 in set(values) and 1.0 in set(values)

    def test_linearity_exact(self, fib):
        rng = np.random.default_rng(5)
        xs = random_hull_points(fib, 31, 250)
        for k in range(4):
            # dyadic values keep float sums exact
            f = box_indicator_fn(Box([-1.0 - k * 0.25], [1.0]), Box([-0.75], [0.25]),
                                 value=1.0 + 0.5 * k)
            g = box_indicator_fn(Box([-0.5], [1.5 + k * 0.5]), Box([-0.25], [0.5]),
                                 value=2.0 - 0.25 * k)
            h = add_fns(f, g)
            for x in xs:
                assert periodize(fib, h, x) == \
                    periodize(fib, f, x) + periodize(fib, g, x)

    def test_equivariance_exact(self, fib):
        """Shifting the test function in the group argument translates the
        hull point: T(f_g)(u, w) = Tf(u + g, w)."""
        xs = random_hull_points(fib, 37, 250)
        for k in range(4):
            f = box_indicator_fn(Box([-1.0], [1.0 + 0.5 * k]), Box([-0.5], [0.25]))
            g = np.array([0.5 * (k + 1)])
            fg = shift_fn(f, g)
            for x in xs:
                assert periodize(fib, fg, x) == \
                    periodize(fib, f, HullPoint(x.u + g, x.w))

    def test_bound_respected(self, fib):
        f = box_indicator_fn(Box([-1.0], [1.0]), Box([-0.5], [0.25]), value=-2.5)
        assert f.bound == 2.5
        h = np.array([[0.0]])
        w = np.array([[0.0]])
        assert abs(f.evaluator(h, w)[0]) <= f.bound


class TestIdentity:
    def test_fibonacci_unbiased(self, fib):
        left_half = Box([-1.0], [(PHI - 2.0) / 2.0])
        f = box_indicator_fn(Box([0.0], [2.0]), left_half)
        rep = verify_transverse_identity(fib, f, 40000, 404)
        assert rep.rhs == pytest.approx(PHI / SQRT5, rel=1e-12)
        assert abs(rep.z) < 4.0

    def test_deterministic(self, fib):
        f = box_indicator_fn(Box([0.0], [1.0]), Box([-0.5], [0.0]))
        a = verify_transverse_identity(fib, f, 5000, 7)
        b = verify_transverse_identity(fib, f, 5000, 7)
        assert a.lhs == b.lhs and a.z == b.z

    def test_report_keys(self, fib):
        f = box_indicator_fn(Box([0.0], [1.0]), Box([-0.5], [0.0]))
        d = verify_transverse_identity(fib, f, 1000, 7).to_dict()
        assert set(d) == {"lhs", "stderr", "rhs", "z", "n", "seed"}

    def test_z2_exact(self, z2):
        # integer-length support: every sample sees exactly one lattice hit
        f = box_indicator_fn(Box([0.0], [1.0]), Box([-0.5], [0.5]))
        rep = verify_transverse_identity(z2, f, 2000, 11)
        assert rep.lhs == 1.0 and rep.rhs == 1.0 and rep.z == 0.0


class TestMeasure:
    def test_probe_too_wide_rejected(self, fib):
        gap = injective_probe_bound(fib)
        with pytest.raises(InjectivityViolated):
            estimate_transverse_measure(fib, Box([-1.0], [0.0]),
                                        centered_box(gap, 1), 100, 3)

    def test_window_mass(self, fib):
        """nu(A) = vol(A cap W)/covol for a parameter box A."""
        gap = injective_probe_bound(fib)
        probe = centered_box(0.45 * gap, 1)
        a = Box([-1.0], [0.0])
        est = estimate_transverse_measure(fib, a, probe, 60000, 99)
        assert est == pytest.approx(1.0 / SQRT5, rel=0.05)

    def test_full_window_total_mass(self, fib):
        gap = injective_probe_bound(fib)
        probe = centered_box(0.45 * gap, 1)
        est = estimate_transverse_measure(fib, Box([-1.0], [1.0]), probe, 60000, 17)
        assert est == pytest.approx(PHI / SQRT5, rel=0.05)


class TestSeparations:
    def test_nk_separation_values(self, fib, z2):
        assert nk_separation(fib) == pytest.approx(2.0 - PHI, rel=1e-9)
        assert nk_separation(z2) == pytest.approx(1.0, rel=1e-12)

    def test_injective_probe_bound_positive(self, fib, z2, cubic):
        for s in (fib, z2, cubic):
            assert injective_probe_bound(s) > 0.0


class TestChangeOfSection:
    def test_z2_translate(self, z2):
        rep = change_of_section_check(z2, np.array([0.3]), Box([-0.5], [0.5]),
                                      20000, 21)
        assert abs(rep.z) <= 4.0

    def test_fibonacci_translates(self, fib):
        for k, g in enumerate(([0.4], [1.0], [-0.7])):
            rep = change_of_section_check(fib, np.array(g), Box([-1.0], [0.0]),
                                          20000, 100 + k)
            assert abs(rep.z) <= 4.0


class TestStages:
    def test_r1_routes_coincide(self, fib):
        zs = [TransversalPoint.of(fib, [0.0])]
        rep = stages_check(fib, 1, zs, Box([-0.8], [0.2]), 20000, 5, t=2000.0)
        assert rep.direct_estimate == rep.staged_estimate
        assert rep.rel_deviation == 0.0

    def test_fibonacci_two_factors(self, fib):
        zs = [TransversalPoint.of(fib, [0.0]), TransversalPoint.of(fib, [0.2])]
        a = Box([-0.6, -0.6], [0.1, 0.1])
        rep = stages_check(fib, 2, zs, a, 60000, 5, t=4000.0)
        assert rep.analytic == pytest.approx(0.7 * 0.7 / 5.0, rel=1e-12)
        assert rep.direct_estimate == pytest.approx(rep.analytic, rel=0.05)
        assert rep.staged_estimate == pytest.approx(rep.analytic, rel=0.05)

    def test_z2_partition_hits(self, z2):
        zs = [TransversalPoint.of(z2, [0.1]), TransversalPoint.of(z2, [-0.2])]
        a = Box([-0.4, -0.4], [0.35, 0.35], )
        rep = stages_check(z2, 2, zs, a, 40000, 9, t=2000.0)
        assert rep.analytic == pytest.approx(0.75 * 0.75, rel=1e-12)
        assert rep.rel_deviation < 0.05
        assert rep.n_hits > 0

    def test_three_factors(self, fib):
        zs = [TransversalPoint.of(fib, [w]) for w in (0.0, 0.15, -0.25)]
        a = Box([-0.5] * 3, [0.1] * 3)
        rep = stages_check(fib, 3, zs, a, 20000, 13, t=3000.0)
        assert rep.analytic == pytest.approx(0.6 ** 3 / SQRT5 ** 3, rel=1e-12)
        assert rep.direct_estimate == pytest.approx(rep.analytic, rel=0.2)
        assert rep.staged_estimate == pytest.approx(rep.analytic, rel=0.2)

    def test_hit_side_beyond_separation_rejected(self, fib):
        zs = [TransversalPoint.of(fib, [0.0]), TransversalPoint.of(fib, [0.2])]
        a = Box([-0.6, -0.6], [0.1, 0.1])
        sep = nk_separation(fib)
        with pytest.raises(InjectivityViolated):
            stages_check(fib, 2, zs, a, 40000, 5, t=2000.0, hit_side=3.0 * sep)

    def test_orbit_diagnostic_z2(self, z2):
        """Fixed-orbit averaging on a non-ergodic factor disagrees with the
        product prediction; the report carries both so the failure is
        visible, never asserted away."""
        zs = [TransversalPoint.of(z2, [0.1]), TransversalPoint.of(z2, [0.1])]
        a = Box([-0.4, -0.4], [0.35, 0.35])
        rep = stages_check(z2, 2, zs, a, 20000, 9, t=2000.0)
        assert rep.orbit_empirical == pytest.approx(1.0, abs=1e-12)
        assert rep.orbit_predicted == pytest.approx(0.75, rel=1e-12)
