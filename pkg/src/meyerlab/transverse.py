"""Periodization onto the hull and transverse-measure estimation.

The transversal of the hull is the set of hull points whose patch contains
0; its return-time set at x is the patch Q_x itself.  Periodization sends a
compactly supported test function f(g, w) to Tf(x) = sum over return times
g of f(g^{-1}, parameter of g.x); its hull average equals the plane integral
of f with the window factor weighted by the transverse measure (Lebesgue on
the window over the covolume, total mass vol(W)/covol, not a probability).

All estimators here are Monte Carlo over Haar-uniform hull samples and come
with analytic window-volume targets; none of them feeds its own prediction
back into the empirical side.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, InjectivityViolated
from .euclid import (
    DEFAULT_BUDGET,
    REL_TOL,
    Box,
    box_intersect,
    centered_box,
    enumerate_lattice,
)
from .cutproject import (
    HullPoint,
    Scheme,
    TransversalPoint,
    _sample_hull_batch,
    model_set,
)
from .pointset import min_gap

_PAD_TOL = 1e-9

# Box radius used to probe a generic patch when bounding injective box sides.
_GAP_PROBE_RADIUS = 100.0


@dataclass(frozen=True, eq=False)
class CompactlySupportedTestFn:
    """Test function on (translation, window parameter), vanishing outside
    support_g x support_w (both half-open boxes).  `evaluator` is vectorized:
    (N, d), (N, m) -> (N,); periodization masks it to the support.  `bound`
    is the declared sup bound on |evaluator|."""

    support_g: Box
    support_w: Box
    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    bound: float = 1.0
    plane_integral: Optional[float] = None
    # set when the function is a constant on its support: enables the
    # vectorized count-based estimators
    constant: Optional[float] = None


def box_indicator_fn(support_g: Box, support_w: Box, value: float = 1.0) -> CompactlySupportedTestFn:
    """value * chi_{support_g x support_w}; plane integral is known."""

    def evaluator(g: np.ndarray, w: np.ndarray) -> np.ndarray:
        return np.full(len(g), value)

    return CompactlySupportedTestFn(
        support_g, support_w, evaluator, bound=abs(value),
        plane_integral=value * support_g.volume * support_w.volume,
        constant=value)


def add_fns(f1: CompactlySupportedTestFn, f2: CompactlySupportedTestFn) -> CompactlySupportedTestFn:
    """Pointwise sum on the bounding hull of the two supports; each summand
    is masked to its own support, since evaluators are only defined there."""
    if f1.support_g.dim != f2.support_g.dim or f1.support_w.dim != f2.support_w.dim:
        raise DimensionMismatch("summands live on different spaces")
    sup_g = Box(np.minimum(f1.support_g.lo, f2.support_g.lo),
                np.maximum(f1.support_g.hi, f2.support_g.hi))
    sup_w = Box(np.minimum(f1.support_w.lo, f2.support_w.lo),
                np.maximum(f1.support_w.hi, f2.support_w.hi))
    integral = None
    if f1.plane_integral is not None and f2.plane_integral is not None:
        integral = f1.plane_integral + f2.plane_integral
    same_supports = (np.array_equal(f1.support_g.lo, f2.support_g.lo)
                     and np.array_equal(f1.support_g.hi, f2.support_g.hi)
                     and np.array_equal(f1.support_w.lo, f2.support_w.lo)
                     and np.array_equal(f1.support_w.hi, f2.support_w.hi))
    const = None
    if same_supports and f1.constant is not None and f2.constant is not None:
        const = f1.constant + f2.constant

    def evaluator(g: np.ndarray, w: np.ndarray) -> np.ndarray:
        out = np.zeros(len(g))
        for f in (f1, f2):
            m = f.support_g.contains(g) & f.support_w.contains(w)
            if np.any(m):
                out[m] += f.evaluator(g[m], w[m])
        return out

    return CompactlySupportedTestFn(sup_g, sup_w, evaluator,
                                    f1.bound + f2.bound, integral, const)


def shift_fn(f: CompactlySupportedTestFn, g_shift: np.ndarray) -> CompactlySupportedTestFn:
    """f_g(h, w) := f(g + h, w): the translate paired with the hull action."""
    g_shift = np.asarray(g_shift, dtype=float)

    def evaluator(h: np.ndarray, w: np.ndarray) -> np.ndarray:
        return f.evaluator(h + g_shift, w)

    return CompactlySupportedTestFn(f.support_g.translate(-g_shift), f.support_w,
                                    evaluator, f.bound, f.plane_integral,
                                    f.constant)


def periodize(scheme: Scheme, f: CompactlySupportedTestFn, x: HullPoint,
              budget: int = DEFAULT_BUDGET) -> float:
    """Tf(x): sum of f(-g, w + gamma*) over return times g = p(gamma) - u of
    the patch at x.  Exact: enumeration covers the support paddedly and the
    half-open support masks decide membership."""
    d, m = scheme.d, scheme.m
    if f.support_g.dim != d or f.support_w.dim != m:
        raise DimensionMismatch("test function supports do not match scheme")
    pad = _PAD_TOL * (float(np.max(np.abs(x.u))) + float(np.max(np.abs(f.support_g.hi))) + 1.0)
    # -g in support_g  <=>  p(gamma) in u - support_g (mirrored); pad covers
    # the flipped half-open orientation, the mask below is exact.
    phys = Box(x.u - f.support_g.hi - pad, x.u - f.support_g.lo + pad)
    win = box_intersect(f.support_w, scheme.window)
    internal = Box(win.lo - x.w - pad, win.hi - x.w + pad)
    coeffs, pts = enumerate_lattice(scheme.basis, scheme.full_region(phys, internal), budget)
    if not len(coeffs):
        return 0.0
    g_inv = x.u - pts[:, :d]
    params = x.w + pts[:, d:]
    mask = (f.support_g.contains(g_inv)
            & f.support_w.contains(params)
            & scheme.window.contains(params))
    if not np.any(mask):
        return 0.0
    return float(np.sum(f.evaluator(g_inv[mask], params[mask])))


# ---------------------------------------------------------------------------
# vectorized indicator engine shared by the Monte Carlo estimators
# ---------------------------------------------------------------------------


def _indicator_counts(scheme: Scheme, param_box: Box, probe_box: Box,
                      us: np.ndarray, ws: np.ndarray,
                      budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """#{gamma : u - p(gamma) in probe_box, w + gamma* in param_box cap W}
    for every hull sample (u, w).  One master enumeration, then broadcasting.
    """
    d, m = scheme.d, scheme.m
    win = box_intersect(param_box, scheme.window)
    counts = np.zeros(len(us), dtype=np.int64)
    if win.volume == 0.0 or probe_box.volume == 0.0:
        return counts
    pad = _PAD_TOL * (float(np.max(np.abs(us))) + float(np.max(np.abs(probe_box.hi))) + 1.0)
    phys = Box(us.min(axis=0) - probe_box.hi - pad, us.max(axis=0) - probe_box.lo + pad)
    internal = Box(win.lo - ws.max(axis=0) - pad, win.hi - ws.min(axis=0) + pad)
    _, pts = enumerate_lattice(scheme.basis, scheme.full_region(phys, internal), budget)
    if not len(pts):
        return counts
    p_phys = pts[:, :d]
    p_star = pts[:, d:]
    chunk = max(1, 4_000_000 // max(len(pts), 1))
    for start in range(0, len(us), chunk):
        u_blk = us[start:start + chunk]
        w_blk = ws[start:start + chunk]
        ok = np.ones((len(u_blk), len(pts)), dtype=bool)
        for k in range(d):
            v = u_blk[:, k, None] - p_phys[None, :, k]
            ok &= (v >= probe_box.lo[k]) & (v < probe_box.hi[k])
        for k in range(m):
            s = w_blk[:, k, None] + p_star[None, :, k]
            ok &= (s >= win.lo[k]) & (s < win.hi[k])
        counts[start:start + chunk] = ok.sum(axis=1)
    return counts


def injective_probe_bound(scheme: Scheme, probe_radius: float = _GAP_PROBE_RADIUS) -> float:
    """Upper bound for probe-box sides keeping (box x transversal) injective:
    the minimum gap of a generic full-window model set."""
    w_center = TransversalPoint.of(
        scheme, (scheme.window.lo + scheme.window.hi) / 2.0)
    patch = model_set(scheme, w_center, centered_box(probe_radius, scheme.d))
    return min_gap(patch)


@dataclass(frozen=True)
class IdentityReport:
    """Monte Carlo check of hull-average(Tf) = plane integral of f."""

    lhs: float
    stderr: float
    rhs: float
    z: float
    n: int
    seed: int

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "stderr": self.stderr, "rhs": self.rhs,
                "z": self.z, "n": self.n, "seed": self.seed}


def verify_transverse_identity(scheme: Scheme, f: CompactlySupportedTestFn,
                               n_samples: int, rng_seed: int,
                               rhs: Optional[float] = None,
                               budget: int = DEFAULT_BUDGET) -> IdentityReport:
    """Estimate the hull average of Tf over n Haar samples and compare with
    the analytic plane integral (translation Lebesgue tensor window Lebesgue
    over covolume).  Indicator-product test functions run vectorized; other
    test functions need an explicit rhs and run pointwise."""
    rng = np.random.default_rng(rng_seed)
    us, ws = _sample_hull_batch(scheme, rng, n_samples)
    win = box_intersect(f.support_w, scheme.window)
    if f.constant is not None:
        if rhs is None:
            rhs = f.constant * f.support_g.volume * win.volume / scheme.covolume
        values = f.constant * _indicator_counts(scheme, f.support_w, f.support_g,
                                                us, ws, budget).astype(float)
    else:
        if rhs is None:
            inside = (np.all(f.support_w.lo >= scheme.window.lo)
                      and np.all(f.support_w.hi <= scheme.window.hi))
            if f.plane_integral is None or not inside:
                raise ValueError("general test functions need an explicit rhs")
            rhs = f.plane_integral / scheme.covolume
        values = np.array([periodize(scheme, f, HullPoint(us[i], ws[i]), budget)
                           for i in range(n_samples)])
    lhs = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else 0.0
    if stderr == 0.0:
        z = 0.0 if abs(lhs - rhs) < 1e-12 else float("inf")
    else:
        z = (lhs - rhs) / stderr
    return IdentityReport(lhs=lhs, stderr=stderr, rhs=float(rhs), z=float(z),
                          n=n_samples, seed=rng_seed)


def estimate_transverse_measure(scheme: Scheme, param_box: Box, probe_box: Box,
                                n_samples: int, rng_seed: int,
                                budget: int = DEFAULT_BUDGET) -> float:
    """nu-hat(param_box) = (fraction of hull samples in probe_box . T_B) over
    vol(probe_box).  The probe box must be injective: its sides are checked
    against the generic patch gap, and any sample with two return-time hits
    raises InjectivityViolated."""
    gap = injective_probe_bound(scheme)
    if float(np.max(probe_box.sides)) >= gap:
        raise InjectivityViolated(
            f"probe side {float(np.max(probe_box.sides)):.4g} >= patch gap {gap:.4g}")
    rng = np.random.default_rng(rng_seed)
    us, ws = _sample_hull_batch(scheme, rng, n_samples)
    counts = _indicator_counts(scheme, param_box, probe_box, us, ws, budget)
    if np.any(counts > 1):
        raise InjectivityViolated(
            f"{int(np.sum(counts > 1))} samples hit the section twice")
    return float(np.mean(counts > 0)) / probe_box.volume


@dataclass(frozen=True)
class SectionReport:
    """Paired comparison of nu-hat on the transversal vs a translated section."""

    est_base: float
    est_translated: float
    se_diff: float
    z: float
    n: int
    seed: int

    def to_dict(self) -> dict:
        return {"est_base": self.est_base, "est_translated": self.est_translated,
                "se_diff": self.se_diff, "z": self.z, "n": self.n, "seed": self.seed}


def change_of_section_check(scheme: Scheme, g: np.ndarray, param_box: Box,
                            n_samples: int, rng_seed: int,
                            probe_box: Optional[Box] = None,
                            budget: int = DEFAULT_BUDGET) -> SectionReport:
    """Transverse mass of param_box measured on the transversal and again on
    the section translated by g (membership there: -g is a return time).
    The pushforward invariance predicts equal values; the z-score uses the
    paired per-sample difference.  The probe box defaults to half the
    injective bound."""
    g = np.atleast_1d(np.asarray(g, dtype=float))
    gap = injective_probe_bound(scheme)
    if probe_box is None:
        probe_box = centered_box(0.25 * gap, scheme.d)
    if float(np.max(probe_box.sides)) >= gap:
        raise InjectivityViolated(
            f"probe side {float(np.max(probe_box.sides)):.4g} >= patch gap {gap:.4g}")
    rng = np.random.default_rng(rng_seed)
    us, ws = _sample_hull_batch(scheme, rng, n_samples)
    c1 = _indicator_counts(scheme, param_box, probe_box, us, ws, budget)
    c2 = _indicator_counts(scheme, param_box, probe_box, us - g, ws, budget)
    if np.any(c1 > 1) or np.any(c2 > 1):
        raise InjectivityViolated("a sample hit a section twice")
    i1 = (c1 > 0).astype(float)
    i2 = (c2 > 0).astype(float)
    vol = probe_box.volume
    est1 = float(np.mean(i1)) / vol
    est2 = float(np.mean(i2)) / vol
    se = float(np.std(i1 - i2, ddof=1) / (vol * np.sqrt(n_samples))) if n_samples > 1 else 0.0
    if se == 0.0:
        z = 0.0 if abs(est1 - est2) < 1e-12 else float("inf")
    else:
        z = (est1 - est2) / se
    return SectionReport(est_base=est1, est_translated=est2, se_diff=se,
                         z=float(z), n=n_samples, seed=rng_seed)


# ---------------------------------------------------------------------------
# restriction in stages
# ---------------------------------------------------------------------------


def nk_separation(scheme: Scheme, probe_radius: float = _GAP_PROBE_RADIUS) -> float:
    """Physical separation of candidate translation corrections between two
    factors: min positive |p(eta)| over eta with eta* in the doubled
    difference window.  Bounds the box side that keeps the two-stage hit
    search injective."""
    ww = scheme.window.sides
    internal = Box(-2.0 * ww, 2.0 * ww)
    region = scheme.full_region(centered_box(probe_radius, scheme.d), internal)
    _, pts = enumerate_lattice(scheme.basis, region)
    norms = np.max(np.abs(pts[:, : scheme.d]), axis=1)
    pos = norms[norms > _PAD_TOL]
    return float(np.min(pos)) if len(pos) else float("inf")


@dataclass(frozen=True)
class StagesReport:
    """Two routes to the product-transversal mass of a parameter box."""

    direct_estimate: float
    staged_estimate: float
    rel_deviation: float
    analytic: float
    n_hits: int
    orbit_predicted: float
    orbit_empirical: float
    r: int
    t: float
    n: int
    seed: int
    probe_side: float
    hit_side: float

    def to_dict(self) -> dict:
        return {
            "direct_estimate": self.direct_estimate,
            "staged_estimate": self.staged_estimate,
            "rel_deviation": self.rel_deviation,
            "analytic": self.analytic,
            "n_hits": self.n_hits,
            "orbit_predicted": self.orbit_predicted,
            "orbit_empirical": self.orbit_empirical,
            "r": self.r, "t": self.t, "n": self.n, "seed": self.seed,
            "probe_side": self.probe_side, "hit_side": self.hit_side,
        }


def _split_param_box(scheme: Scheme, A: Box, r: int) -> List[Box]:
    if A.dim != scheme.m * r:
        raise DimensionMismatch(f"parameter box dim {A.dim} != m*r = {scheme.m * r}")
    m = scheme.m
    return [Box(A.lo[k * m:(k + 1) * m], A.hi[k * m:(k + 1) * m]) for k in range(r)]


def _count_return_windows(scheme: Scheme, t: float, win_lo: np.ndarray,
                          win_hi: np.ndarray,
                          budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """#{gamma : p(gamma) in [-t,t)^d, gamma* in [win_lo, win_hi)} per row of
    the window arrays (H, m).  Closed-form coefficient sweep when d = m = 1
    and the first basis column is nonnegative with a positive physical
    entry; exact enumeration otherwise."""
    win_lo = np.atleast_2d(np.asarray(win_lo, dtype=float))
    win_hi = np.atleast_2d(np.asarray(win_hi, dtype=float))
    counts = np.zeros(len(win_lo), dtype=np.int64)
    live = np.all(win_hi > win_lo, axis=1)
    if not np.any(live):
        return counts
    mtx = scheme.basis.matrix
    if scheme.d == 1 and scheme.m == 1 and mtx[0, 0] > 0.0 and mtx[1, 0] >= 0.0:
        region = scheme.full_region(
            centered_box(t, 1),
            Box([win_lo[live].min()], [win_hi[live].max()]))
        cc = region.corners() @ scheme.basis.inverse.T
        slack = REL_TOL * (np.max(np.abs(cc)) + 1.0)
        b = np.arange(int(np.ceil(cc[:, 1].min() - slack)),
                      int(np.floor(cc[:, 1].max() + slack)) + 1, dtype=float)
        if not len(b):
            return counts
        # first coefficient ranges, half-open on both constraint rows
        pa_lo = (-t - mtx[0, 1] * b) / mtx[0, 0]
        pa_hi = (t - mtx[0, 1] * b) / mtx[0, 0]
        star_b = mtx[1, 1] * b
        chunk = max(1, 8_000_000 // len(b))
        for start in range(0, len(win_lo), chunk):
            wl = win_lo[start:start + chunk, 0][:, None]
            wh = win_hi[start:start + chunk, 0][:, None]
            if mtx[1, 0] > 0.0:
                lo_a = np.maximum(pa_lo[None, :], (wl - star_b[None, :]) / mtx[1, 0])
                hi_a = np.minimum(pa_hi[None, :], (wh - star_b[None, :]) / mtx[1, 0])
            else:
                ok = (star_b[None, :] >= wl) & (star_b[None, :] < wh)
                lo_a = np.where(ok, pa_lo[None, :], 0.0)
                hi_a = np.where(ok, pa_hi[None, :], 0.0)
            # integers in [lo_a, hi_a): ceil with slack keeps lo inclusive
            # and hi exclusive even under float noise at exact boundaries
            slack_a = REL_TOL * (np.maximum(np.abs(lo_a), np.abs(hi_a)) + 1.0)
            n_int = np.ceil(hi_a - slack_a) - np.ceil(lo_a - slack_a)
            counts[start:start + chunk] = np.maximum(n_int, 0.0).sum(axis=1).astype(np.int64)
        counts[~live] = 0
        return counts
    for i in np.nonzero(live)[0]:
        region = scheme.full_region(centered_box(t, scheme.d),
                                    Box(win_lo[i], win_hi[i]))
        coeffs, _ = enumerate_lattice(scheme.basis, region, budget)
        counts[i] = len(coeffs)
    return counts


def stages_check(scheme: Scheme, r: int, zs: Sequence[TransversalPoint], A: Box,
                 n_samples: int, rng_seed: int, t: float = 1.0e4,
                 probe_side: Optional[float] = None,
                 hit_side: Optional[float] = None,
                 budget: int = DEFAULT_BUDGET) -> StagesReport:
    """Product-transversal mass of the parameter box A (product of r factor
    boxes inside W), computed two ways.

    (a) direct: product of one-factor probe-box estimates of each factor
        mass.
    (b) in stages: restrict along the relative translations first (find, per
        product sample, the physical correction inside a small box that
        gives all factors a common return lattice), then take the empirical
        density of the corrected common-return set restricted to A at
        horizon t.

    Both routes target prod_k vol(A_k) / covol^r.  For r = 1 they are the
    same estimator.  Lattice witnesses sharing one physical correction
    partition the common-return set and are summed; two witnesses with
    distinct corrections inside the hit box, or overlapping same-correction
    windows, raise InjectivityViolated.  The given zs seed a per-orbit
    diagnostic row: window-volume prediction for that specific orbit next
    to its empirical density.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    if len(zs) != r:
        raise ValueError(f"need {r} transversal points, got {len(zs)}")
    win = scheme.window
    boxes = [box_intersect(bx, win) for bx in _split_param_box(scheme, A, r)]
    for bx in boxes:
        if bx.volume <= 0.0:
            raise ValueError("every factor box must meet the window")
    d, m = scheme.d, scheme.m
    gap = injective_probe_bound(scheme)
    if probe_side is None:
        probe_side = 0.9 * gap
    if probe_side >= gap:
        raise InjectivityViolated(f"probe side {probe_side:.4g} >= patch gap {gap:.4g}")
    sep = nk_separation(scheme)
    if hit_side is None:
        hit_side = min(0.8 * sep, probe_side) if np.isfinite(sep) else probe_side
    if hit_side > sep:
        raise InjectivityViolated(f"hit-box side {hit_side:.4g} > separation {sep:.4g}")
    probe = centered_box(probe_side / 2.0, d)
    rng = np.random.default_rng(rng_seed)

    us = np.empty((n_samples, r, d))
    ws = np.empty((n_samples, r, m))
    for k in range(r):
        us[:, k, :], ws[:, k, :] = _sample_hull_batch(scheme, rng, n_samples)

    # (a) direct product of one-factor estimates
    direct = 1.0
    for k in range(r):
        counts = _indicator_counts(scheme, boxes[k], probe, us[:, k, :], ws[:, k, :], budget)
        if np.any(counts > 1):
            raise InjectivityViolated("probe box hit a factor section twice")
        direct *= float(np.mean(counts > 0)) / probe.volume

    # (b) two stages; base factor is the last one
    base = r - 1
    half = hit_side / 2.0
    a_lo = np.array([bx.lo for bx in boxes])
    a_hi = np.array([bx.hi for bx in boxes])
    if r == 1:
        counts = _indicator_counts(scheme, boxes[0], probe, us[:, 0, :], ws[:, 0, :], budget)
        staged = float(np.mean(counts > 0)) / probe.volume
        n_hits = int(np.sum(counts > 0))
    else:
        per_factor: List[Tuple[np.ndarray, np.ndarray]] = []
        for j in range(r - 1):
            du = us[:, j, :] - us[:, base, :]
            dw = ws[:, base, :] - ws[:, j, :]
            pad = _PAD_TOL * (float(np.max(np.abs(du))) + 1.0)
            phys = Box(du.min(axis=0) - half - pad, du.max(axis=0) + half + pad)
            internal = Box(win.lo - win.hi + dw.min(axis=0) - pad,
                           win.hi - win.lo + dw.max(axis=0) + pad)
            _, pts = enumerate_lattice(scheme.basis, scheme.full_region(phys, internal), budget)
            per_factor.append((pts[:, :d], pts[:, d:]))
        if r == 2:
            j_lo, j_hi = _hits_two_factors(scheme, us, ws, per_factor[0], half,
                                           a_lo, a_hi)
        else:
            j_lo, j_hi = _hits_many_factors(scheme, us, ws, per_factor, half,
                                            a_lo, a_hi)
        n_hits = len(j_lo)
        staged_sum = 0.0
        if n_hits:
            counts = _count_return_windows(scheme, t, j_lo, j_hi, budget)
            staged_sum = float(np.sum(counts)) / (2.0 * t) ** d
        staged = staged_sum / (n_samples * hit_side ** (d * (r - 1)))

    analytic = float(np.prod([bx.volume for bx in boxes])) / scheme.covolume ** r
    denom = max(abs(direct), abs(staged), 1e-300)
    rel = abs(direct - staged) / denom

    # per-orbit diagnostic at the supplied transversal points
    orbit_window = boxes[0].translate(-zs[0].w)
    for k in range(1, r):
        orbit_window = box_intersect(orbit_window, boxes[k].translate(-zs[k].w))
    orbit_pred = orbit_window.volume / scheme.covolume
    orbit_count = int(_count_return_windows(
        scheme, t, orbit_window.lo[None, :], orbit_window.hi[None, :], budget)[0])
    orbit_emp = orbit_count / (2.0 * t) ** d

    return StagesReport(direct_estimate=direct, staged_estimate=staged,
                        rel_deviation=rel, analytic=analytic, n_hits=n_hits,
                        orbit_predicted=orbit_pred, orbit_empirical=orbit_emp,
                        r=r, t=t, n=n_samples, seed=rng_seed,
                        probe_side=float(probe_side), hit_side=float(hit_side))


def _hits_two_factors(scheme: Scheme, us: np.ndarray, ws: np.ndarray,
                      candidates: Tuple[np.ndarray, np.ndarray], half: float,
                      a_lo: np.ndarray, a_hi: np.ndarray
                      ) -> Tuple[np.ndarray, np.ndarray]:
    """Accepted-hit parameter windows for r = 2, vectorized over samples.
    Returns (H, m) lo/hi arrays of the per-hit restricted windows."""
    d, m = scheme.d, scheme.m
    win = scheme.window
    p_phys, p_star = candidates
    empty = (np.zeros((0, m)), np.zeros((0, m)))
    if not len(p_phys):
        return empty
    du = us[:, 0, :] - us[:, 1, :]
    ok = np.ones((len(us), len(p_phys)), dtype=bool)
    for k in range(d):
        n_k = p_phys[None, :, k] - du[:, k, None]
        ok &= (n_k >= -half) & (n_k < half)
    i_idx, q_idx = np.nonzero(ok)
    if not len(i_idx):
        return empty
    # acceptance: the corrected pair shares return lattice directions iff
    # the shifted windows overlap
    o_lo = np.maximum(win.lo[None, :] - ws[i_idx, 1, :],
                      win.lo[None, :] - ws[i_idx, 0, :] - p_star[q_idx])
    o_hi = np.minimum(win.hi[None, :] - ws[i_idx, 1, :],
                      win.hi[None, :] - ws[i_idx, 0, :] - p_star[q_idx])
    good = np.all(o_hi > o_lo, axis=1)
    i_idx, q_idx, o_lo, o_hi = i_idx[good], q_idx[good], o_lo[good], o_hi[good]
    if len(i_idx) > 1:
        # np.nonzero already yields sample-major order
        same = i_idx[1:] == i_idx[:-1]
        if np.any(same):
            dp = np.max(np.abs(p_phys[q_idx[1:]] - p_phys[q_idx[:-1]]), axis=1)
            if np.any(same & (dp > 1e-9)):
                raise InjectivityViolated(
                    "two distinct corrections inside the hit box; shrink it")
            # same correction: witnesses must partition the return set
            # (adjacent pieces may overlap by float noise; demand real volume)
            ov_lo = np.maximum(o_lo[1:], o_lo[:-1])
            ov_hi = np.minimum(o_hi[1:], o_hi[:-1])
            if np.any(same & np.all(ov_hi - ov_lo > 1e-9, axis=1)):
                raise InjectivityViolated(
                    "overlapping common-return windows for one correction")
    j_lo = np.maximum(a_lo[1][None, :] - ws[i_idx, 1, :],
                      a_lo[0][None, :] - ws[i_idx, 0, :] - p_star[q_idx])
    j_hi = np.minimum(a_hi[1][None, :] - ws[i_idx, 1, :],
                      a_hi[0][None, :] - ws[i_idx, 0, :] - p_star[q_idx])
    return j_lo, j_hi


def _hits_many_factors(scheme: Scheme, us: np.ndarray, ws: np.ndarray,
                       per_factor: Sequence[Tuple[np.ndarray, np.ndarray]],
                       half: float, a_lo: np.ndarray, a_hi: np.ndarray
                       ) -> Tuple[np.ndarray, np.ndarray]:
    """General-r hit search; per-sample combination loop over the (sparse)
    in-box candidates of every non-base factor."""
    d, m = scheme.d, scheme.m
    win = scheme.window
    n_samples = len(us)
    r = len(per_factor) + 1
    base = r - 1
    rows_lo: List[np.ndarray] = []
    rows_hi: List[np.ndarray] = []
    for i in range(n_samples):
        choices: List[List[int]] = [[]]
        alive = True
        for j in range(r - 1):
            p_phys, _ = per_factor[j]
            if not len(p_phys):
                alive = False
                break
            n_j = p_phys - (us[i, j, :] - us[i, base, :])
            idx = np.nonzero(np.all((n_j >= -half) & (n_j < half), axis=1))[0]
            if not len(idx):
                alive = False
                break
            choices = [c + [q] for c in choices for q in idx]
        if not alive:
            continue
        accepted: List[Tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        for combo in choices:
            o_lo = win.lo - ws[i, base, :]
            o_hi = win.hi - ws[i, base, :]
            j_lo = a_lo[base] - ws[i, base, :]
            j_hi = a_hi[base] - ws[i, base, :]
            p_part = []
            for j, q in enumerate(combo):
                p_phys, p_star = per_factor[j]
                o_lo = np.maximum(o_lo, win.lo - ws[i, j, :] - p_star[q])
                o_hi = np.minimum(o_hi, win.hi - ws[i, j, :] - p_star[q])
                j_lo = np.maximum(j_lo, a_lo[j] - ws[i, j, :] - p_star[q])
                j_hi = np.minimum(j_hi, a_hi[j] - ws[i, j, :] - p_star[q])
                p_part.append(p_phys[q])
            if np.all(o_hi > o_lo):
                accepted.append((np.concatenate(p_part), o_lo, o_hi))
                rows_lo.append(j_lo)
                rows_hi.append(j_hi)
        for a in range(len(accepted)):
            for b in range(a + 1, len(accepted)):
                if np.max(np.abs(accepted[a][0] - accepted[b][0])) > 1e-9:
                    raise InjectivityViolated(
                        "two distinct corrections inside the hit box; shrink it")
                if np.all(np.minimum(accepted[a][2], accepted[b][2])
                          - np.maximum(accepted[a][1], accepted[b][1]) > 1e-9):
                    raise InjectivityViolated(
                        "overlapping common-return windows for one correction")
    if not rows_lo:
        return np.zeros((0, m)), np.zeros((0, m))
    return np.array(rows_lo), np.array(rows_hi)
