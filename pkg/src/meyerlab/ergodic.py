"""Averaging sequences, lower densities, transversal averages, and the
recurrence / intersection-density experiments.

Averaging is over centered half-open boxes G_t = [-t, t)^d.  Lower density
is reported conservatively as the minimum ratio over the tail quartile of
the t grid, a downward-biased liminf surrogate.  Every predicted value here
is an analytic window-volume formula; the empirical side never consults it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import NoHits
from .euclid import DEFAULT_BUDGET, Box, box_erode, box_intersect, centered_box, enumerate_lattice
from .cutproject import (
    Scheme,
    TransversalPoint,
    _sample_transversal,
    intersection_window,
    model_set,
    predicted_intersection_density,
)
from .pointset import Patch, patch_distance, return_time_set


@dataclass(frozen=True)
class ConvenientSequence:
    """Centered-box averaging family G_t = [-t,t)^d over an increasing grid
    of scales, with shrinking neighborhoods V_n = (-1/n, 1/n)^d."""

    d: int
    t_grid: np.ndarray

    def __post_init__(self) -> None:
        grid = np.asarray(self.t_grid, dtype=float)
        if grid.ndim != 1 or len(grid) == 0:
            raise ValueError("t_grid must be a nonempty 1-d array")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("t_grid must be strictly increasing")
        if grid[0] <= 1.0:
            raise ValueError("t_grid entries must exceed 1")
        grid.flags.writeable = False
        object.__setattr__(self, "t_grid", grid)

    @property
    def kind(self) -> str:
        return "centered-box"

    def box(self, t: float) -> Box:
        return centered_box(t, self.d)

    def volume(self, t: float) -> float:
        return (2.0 * t) ** self.d

    def neighborhood(self, n: int) -> Box:
        return centered_box(1.0 / n, self.d)


def geometric_grid(t_min: float, t_max: float, count: int, d: int = 1) -> ConvenientSequence:
    """Convenience constructor: geometrically spaced scales."""
    return ConvenientSequence(d, np.geomspace(t_min, t_max, count))


@dataclass(frozen=True)
class ConvenientRow:
    n: int
    delta: float
    eps: float
    containment_ok: bool
    degenerate: bool


@dataclass(frozen=True)
class ConvenientReport:
    """Boundary-regularity check of the box family.  The pointwise ergodic
    theorem for box averages (the sequence's second defining condition) is
    assumed, not checked; empirical convergence traces elsewhere are the
    only evidence."""

    rows: List[ConvenientRow]
    ok: bool
    pointwise_ergodic_assumed: bool = True

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "pointwise_ergodic_assumed": self.pointwise_ergodic_assumed,
            "rows": [{"n": r.n, "delta": r.delta, "eps": r.eps,
                      "containment_ok": r.containment_ok,
                      "degenerate": r.degenerate} for r in self.rows],
        }


def verify_convenient(seq: ConvenientSequence, n_max: int) -> ConvenientReport:
    """For boxes the V_n-erosion of G_t is exactly [-t+1/n, t-1/n)^d, so the
    shrunken box G_{t - delta_n} with delta_n = 1/n must coincide with it;
    eps_n is the measured sup over the grid of the volume-ratio defects of
    G_{t +- 1/n} against G_t."""
    rows: List[ConvenientRow] = []
    d = seq.d
    for n in range(1, n_max + 1):
        delta = 1.0 / n
        degenerate = bool(seq.t_grid[0] - delta <= 0.0)
        contain = not degenerate
        eps = 0.0
        for t in seq.t_grid:
            eroded = box_erode(seq.box(t), delta)
            shrunk = centered_box(t - delta, d) if t - delta > 0 else None
            if shrunk is None or eroded.volume == 0.0:
                contain = False
                degenerate = True
                continue
            if not (np.all(shrunk.lo >= eroded.lo) and np.all(shrunk.hi <= eroded.hi)):
                contain = False
            grow = (1.0 + delta / t) ** d - 1.0
            shrink = 1.0 - max(1.0 - delta / t, 0.0) ** d
            eps = max(eps, grow, shrink)
        rows.append(ConvenientRow(n=n, delta=delta, eps=eps,
                                  containment_ok=contain, degenerate=degenerate))
    return ConvenientReport(rows=rows, ok=all(r.containment_ok for r in rows))


@dataclass(frozen=True)
class DensityTrace:
    """Counting trace over the averaging grid.  counts may be real-valued
    (weighted sums for transversal averages); ratio = count / (2t)^d.  The
    reported estimate is the minimum ratio over the tail quartile."""

    ts: np.ndarray
    counts: np.ndarray
    volumes: np.ndarray
    ratios: np.ndarray

    @property
    def estimate(self) -> float:
        tail = max(1, len(self.ts) // 4)
        return float(np.min(self.ratios[-tail:]))

    def rows(self) -> List[Tuple[float, float, float, float]]:
        return [(float(t), float(c), float(v), float(r)) for t, c, v, r
                in zip(self.ts, self.counts, self.volumes, self.ratios)]


def _trace_from_values(seq: ConvenientSequence, points: np.ndarray,
                       values: Optional[np.ndarray] = None) -> DensityTrace:
    """Per-t totals of values at points inside G_t (count when values is
    None), handling the half-open boundary exactly."""
    ts = seq.t_grid
    counts = np.zeros(len(ts))
    if len(points):
        vals = np.ones(len(points)) if values is None else values
        for i, t in enumerate(ts):
            inside = np.all((points >= -t) & (points < t), axis=1)
            counts[i] = vals[inside].sum()
    volumes = np.array([seq.volume(t) for t in ts])
    return DensityTrace(ts=ts, counts=counts, volumes=volumes,
                        ratios=counts / volumes)


def lower_density(patch_source: Callable[[Box], Patch],
                  seq: ConvenientSequence) -> DensityTrace:
    """Lower (G_t)-density trace of the point set produced by patch_source,
    queried once on the largest box of the grid."""
    patch = patch_source(seq.box(float(seq.t_grid[-1])))
    return _trace_from_values(seq, patch.points)


def transversal_average(scheme: Scheme, z: TransversalPoint,
                        f: Callable[[np.ndarray], np.ndarray],
                        seq: ConvenientSequence,
                        budget: int = DEFAULT_BUDGET) -> DensityTrace:
    """Diagonal-orbit averages (1/vol G_t) * sum over return times g of
    f(parameter of g.z), per grid scale.  f maps (N, m) parameter arrays to
    (N,) reals and should be bounded; the trace's estimate targets
    (1/covol) * integral of f over W."""
    patch = model_set(scheme, z, seq.box(float(seq.t_grid[-1])), budget)
    params = z.w[None, :] + scheme.star_of_coeffs(patch.coeffs)
    values = np.asarray(f(params), dtype=float)
    if values.shape != (len(params),):
        raise ValueError("f must map (N, m) parameters to (N,) values")
    return _trace_from_values(seq, patch.points, values)


@dataclass(frozen=True)
class RecurrenceHit:
    """A simultaneous return: g = p(gamma) lies in every Q_{w_k} and moves
    each parameter by less than the requested bound."""

    g: np.ndarray
    coeffs: np.ndarray
    internal_norm: float
    patch_dists: np.ndarray

    @property
    def g_norm(self) -> float:
        return float(np.linalg.norm(self.g))


def recurrence_search(scheme: Scheme, zs: Sequence[TransversalPoint], eps: float,
                      min_norm: float, t_max: float,
                      diag_limit: int = 3, diag_radius: float = 20.0,
                      budget: int = DEFAULT_BUDGET) -> List[RecurrenceHit]:
    """All gamma with p(gamma) in [-t_max, t_max)^d outside the min_norm
    core, |gamma*|_sup < eps, and gamma* in every shifted window (so p(gamma)
    is a return time of every z_k simultaneously).  Hits are sorted by |g|
    then coefficients; the first diag_limit hits carry patch-distance
    diagnostics (NaN beyond, they are expensive).  Raises NoHits with the
    internal-margin diagnostics when the search region is too small."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not 0.0 <= min_norm < t_max:
        raise ValueError("need 0 <= min_norm < t_max")
    for z in zs:
        if z.margin <= eps:
            raise ValueError(
                f"margin {z.margin:.4g} <= eps {eps:.4g}: hits are not guaranteed")
    d, m = scheme.d, scheme.m
    internal = box_intersect(centered_box(eps, m), intersection_window(scheme, zs))
    coeffs, pts = enumerate_lattice(scheme.basis,
                                    scheme.full_region(centered_box(t_max, d), internal),
                                    budget)
    if len(coeffs):
        phys = pts[:, :d]
        stars = pts[:, d:]
        keep = ~np.all((phys >= -min_norm) & (phys < min_norm), axis=1)
        keep &= np.max(np.abs(stars), axis=1) < eps
        coeffs, phys, stars = coeffs[keep], phys[keep], stars[keep]
    if not len(coeffs):
        raise NoHits(
            f"no simultaneous return with |g| >= {min_norm:.4g} inside "
            f"t_max={t_max:.4g}, eps={eps:.4g}; margins "
            f"{[round(z.margin, 4) for z in zs]}")
    order = np.lexsort(tuple(coeffs[:, i] for i in range(coeffs.shape[1] - 1, -1, -1))
                       + (np.linalg.norm(phys, axis=1),))
    coeffs, phys, stars = coeffs[order], phys[order], stars[order]
    win = scheme.window
    hits: List[RecurrenceHit] = []
    for i in range(len(coeffs)):
        params = stars[i][None, :] + np.array([z.w for z in zs])
        if not np.all(win.contains(params)):
            raise AssertionError("enumerated hit fails the exact window check")
        if i < diag_limit:
            dists = np.array([_hit_patch_distance(scheme, z, phys[i], diag_radius, budget)
                              for z in zs])
        else:
            dists = np.full(len(zs), np.nan)
        hits.append(RecurrenceHit(g=phys[i], coeffs=coeffs[i],
                                  internal_norm=float(np.max(np.abs(stars[i]))),
                                  patch_dists=dists))
    return hits


def _hit_patch_distance(scheme: Scheme, z: TransversalPoint, g: np.ndarray,
                        radius: float, budget: int = DEFAULT_BUDGET) -> float:
    """Local matching distance between Q_{w} - g and Q_{w} around the
    origin, the convergence certificate g.Q -> Q."""
    near = model_set(scheme, z, Box(g - radius - 1.0, g + radius + 1.0), budget)
    base = model_set(scheme, z, centered_box(radius + 1.0, scheme.d), budget)
    return patch_distance(near.translate(-g), base, radius)


@dataclass(frozen=True)
class IntersectionRow:
    trial: int
    predicted: float
    empirical: float
    rel_err: float
    ws: np.ndarray


def intersection_trial(scheme: Scheme, r: int, seq: ConvenientSequence,
                       seed: int, eta: float, trial: int = 0,
                       budget: int = DEFAULT_BUDGET) -> IntersectionRow:
    """One sampled intersection-density comparison; deterministic in seed."""
    rng = np.random.default_rng(seed)
    zs = [_sample_transversal(scheme, rng, eta) for _ in range(r)]
    predicted = predicted_intersection_density(scheme, zs)
    if predicted <= 0.0:
        raise AssertionError("sampled windows must overlap: margin policy violated")
    t_max = float(seq.t_grid[-1])
    patches = [model_set(scheme, z, seq.box(t_max), budget) for z in zs]
    common = return_time_set(patches, t_max)
    trace = _trace_from_values(seq, common.points)
    empirical = trace.estimate
    rel = abs(empirical - predicted) / predicted
    return IntersectionRow(trial=trial, predicted=predicted, empirical=empirical,
                           rel_err=rel, ws=np.array([z.w for z in zs]))


def intersection_density_experiment(scheme: Scheme, r: int, trials: int,
                                    seq: ConvenientSequence, rng_seed: int,
                                    eta: Optional[float] = None,
                                    budget: int = DEFAULT_BUDGET) -> List[IntersectionRow]:
    """Per trial: sample r transversal parameters at margin eta, compare the
    window-volume prediction for the density of the common point set with
    the empirical lower density over the grid."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if eta is None:
        eta = 0.05 * float(np.min(scheme.window.sides))
    seeds = np.random.SeedSequence(rng_seed).spawn(trials)
    rows = []
    for i, child in enumerate(seeds):
        rows.append(intersection_trial(scheme, r, seq,
                                       child.generate_state(1)[0], eta, trial=i,
                                       budget=budget))
    return rows


@dataclass(frozen=True)
class StaircaseStep:
    k: int
    eps: float
    g: np.ndarray
    g_norm: float
    internal_norm: float
    patch_dist: float


@dataclass(frozen=True)
class StaircaseTrial:
    trial: int
    w: np.ndarray
    steps: List[StaircaseStep]
    complete: bool


def poincare_trial(scheme: Scheme, eps_schedule: Sequence[float], seed: int,
                   eta: float, t_max: float, trial: int = 0,
                   diagnostics: bool = False,
                   budget: int = DEFAULT_BUDGET) -> StaircaseTrial:
    """One staircase: per shrinking eps, the smallest return time at least
    one unit farther out than the previous step, with internal displacement
    below eps."""
    rng = np.random.default_rng(seed)
    z = _sample_transversal(scheme, rng, eta)
    steps: List[StaircaseStep] = []
    if len(eps_schedule) == 0:
        return StaircaseTrial(trial=trial, w=z.w, steps=steps, complete=True)
    if any(b >= a for a, b in zip(eps_schedule, list(eps_schedule)[1:])):
        raise ValueError("eps_schedule must be strictly decreasing")
    eps_max = float(eps_schedule[0])
    internal = box_intersect(centered_box(eps_max, scheme.m),
                             scheme.window.translate(-z.w))
    coeffs, pts = enumerate_lattice(scheme.basis,
                                    scheme.full_region(centered_box(t_max, scheme.d), internal),
                                    budget)
    phys, stars = pts[:, :scheme.d], pts[:, scheme.d:]
    norms = np.linalg.norm(phys, axis=1)
    internal_norms = np.max(np.abs(stars), axis=1) if scheme.m else np.zeros(len(pts))
    prev = 0.0
    complete = True
    for k, eps in enumerate(eps_schedule):
        ok = (internal_norms < eps) & (norms >= prev + 1.0)
        if not np.any(ok):
            complete = False
            break
        cand = np.nonzero(ok)[0]
        best = cand[np.argmin(norms[cand])]
        dist = (_hit_patch_distance(scheme, z, phys[best], 20.0, budget)
                if diagnostics else float("nan"))
        steps.append(StaircaseStep(k=k, eps=float(eps), g=phys[best],
                                   g_norm=float(norms[best]),
                                   internal_norm=float(internal_norms[best]),
                                   patch_dist=dist))
        prev = float(norms[best])
    return StaircaseTrial(trial=trial, w=z.w, steps=steps, complete=complete)


def transverse_poincare_experiment(scheme: Scheme, trials: int,
                                   eps_schedule: Sequence[float], rng_seed: int,
                                   eta: Optional[float] = None,
                                   t_max: float = 1.0e5,
                                   diagnostics: bool = False,
                                   budget: int = DEFAULT_BUDGET) -> List[StaircaseTrial]:
    """Per sampled transversal point, build the g_n -> infinity staircase
    with g_n.z -> z through the shrinking eps schedule."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if eta is None:
        eta = 0.05 * float(np.min(scheme.window.sides))
    if len(eps_schedule) and eta <= float(eps_schedule[0]):
        raise ValueError("margin eta must exceed the largest eps")
    seeds = np.random.SeedSequence(rng_seed).spawn(trials)
    return [poincare_trial(scheme, eps_schedule, child.generate_state(1)[0],
                           eta, t_max, trial=i, diagnostics=diagnostics, budget=budget)
            for i, child in enumerate(seeds)]
