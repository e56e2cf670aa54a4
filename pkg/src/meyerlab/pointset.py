"""Finite patches of locally finite point sets, with the set arithmetic used
by Delone and approximate-lattice diagnostics.

Every patch records the box where it is complete (its extent); each
arithmetic operation states the box where its *output* is complete and
refuses queries beyond it.  Patches cut from a lattice carry exact integer
coefficients, and operations match points exactly through them whenever both
operands share the same frame (same basis, same physical offset); otherwise
matching falls back to float tolerance 1e-9.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    EmptyPatch,
    ExtentTooSmall,
    DimensionMismatch,
    RadiusExceedsValidity,
    RegionTooLarge,
)
from .euclid import Box, LatticeBasis, centered_box

# Exact-duplicate threshold; far below any physical minimum gap.
_DUP_TOL = 1e-12

# Float-matching tolerance when exact coefficients are unavailable.
MATCH_TOL = 1e-9

_PAIR_BUDGET = 50_000_000


def _lexsort_rows(points: np.ndarray) -> np.ndarray:
    return np.lexsort(points.T[::-1])


@dataclass(frozen=True, eq=False)
class Patch:
    """Finite point set, lex-sorted and deduplicated, complete on `extent`.

    `coeffs`, `basis`, `offset` tie points back to a lattice frame:
    point = (basis @ coeff)[:d] - offset.  Two patches match exactly when
    they share the frame; otherwise operations use float tolerance.
    """

    points: np.ndarray
    extent: Box
    coeffs: Optional[np.ndarray] = None
    basis: Optional[LatticeBasis] = None
    offset: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            pts = pts.reshape(-1, self.extent.dim)
        if pts.shape[1] != self.extent.dim:
            raise DimensionMismatch(f"points dim {pts.shape[1]} vs extent dim {self.extent.dim}")
        coeffs = None if self.coeffs is None else np.asarray(self.coeffs, dtype=np.int64)
        if coeffs is not None and len(coeffs) != len(pts):
            raise ValueError("coeffs and points length mismatch")
        if len(pts):
            order = _lexsort_rows(pts)
            pts = pts[order]
            if coeffs is not None:
                coeffs = coeffs[order]
            keep = np.ones(len(pts), dtype=bool)
            keep[1:] = np.max(np.abs(np.diff(pts, axis=0)), axis=1) >= _DUP_TOL
            pts = pts[keep]
            if coeffs is not None:
                coeffs = coeffs[keep]
        if len(pts) and not np.all(self.extent.contains(pts)):
            raise ValueError("patch points outside declared extent")
        off = self.offset
        if off is None and self.basis is not None:
            off = np.zeros(pts.shape[1])
        if off is not None:
            off = np.asarray(off, dtype=float).copy()
            off.flags.writeable = False
        pts = pts.copy()
        pts.flags.writeable = False
        if coeffs is not None:
            coeffs = coeffs.copy()
            coeffs.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "offset", off)

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def exact(self) -> bool:
        return self.coeffs is not None and self.basis is not None

    def same_frame(self, other: "Patch") -> bool:
        if not (self.exact and other.exact):
            return False
        if self.basis.matrix.shape != other.basis.matrix.shape:
            return False
        if not np.array_equal(self.basis.matrix, other.basis.matrix):
            return False
        return np.array_equal(self.offset, other.offset)

    def restrict(self, region: Box) -> "Patch":
        """Sub-patch inside `region`; valid only for region inside the extent."""
        _require_covers(self.extent, region)
        mask = region.contains(self.points) if self.size else np.zeros(0, dtype=bool)
        return Patch(self.points[mask], region,
                     None if self.coeffs is None else self.coeffs[mask],
                     self.basis, self.offset)

    def translate(self, shift: np.ndarray) -> "Patch":
        """Translate all points by `shift`; the lattice frame follows along."""
        shift = np.asarray(shift, dtype=float)
        off = None if self.offset is None else self.offset - shift
        return Patch(self.points + shift, self.extent.translate(shift),
                     self.coeffs, self.basis, off)

    def coeff_keys(self) -> set:
        if self.coeffs is None:
            raise ValueError("patch has no coefficients")
        return set(map(tuple, self.coeffs.tolist()))


def _require_covers(extent: Box, region: Box) -> None:
    if region.dim != extent.dim:
        raise DimensionMismatch(f"region dim {region.dim} vs extent dim {extent.dim}")
    if np.any(region.lo < extent.lo) or np.any(region.hi > extent.hi):
        raise ExtentTooSmall(f"requested {region}, valid only on {extent}")


def _half_sides(extent: Box) -> float:
    return float(np.min(extent.sides)) / 2.0


def min_gap(patch: Patch) -> float:
    """Smallest pairwise Euclidean distance; inf for fewer than two points."""
    return float(np.min(nearest_distances(patch), initial=np.inf))


def nearest_distances(patch: Patch) -> np.ndarray:
    """Per-point distance to the nearest other point; empty when size < 2."""
    if patch.size <= 1:
        return np.zeros(0)
    tree = cKDTree(patch.points)
    dist, _ = tree.query(patch.points, k=2)
    return dist[:, 1]


def covering_radius(patch: Patch, region: Box, grid_step: float) -> float:
    """Max distance from a grid of step `grid_step` over `region` to the patch.

    The grid starts at region.lo on each axis.  Upper-bounds the true covering
    radius of the patch over the region up to grid resolution.
    """
    if patch.size == 0:
        raise EmptyPatch("covering radius needs at least one point")
    _require_covers(patch.extent, region)
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    axes = [np.arange(region.lo[i], region.hi[i], grid_step) for i in range(region.dim)]
    n_nodes = int(np.prod([len(a) for a in axes]))
    if n_nodes > 2_000_000:
        raise RegionTooLarge(f"{n_nodes} grid nodes")
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    tree = cKDTree(patch.points)
    dist, _ = tree.query(grid)
    return float(np.max(dist))


def _pairwise(pa: Patch, pb: Patch, sign: int, out_box: Box) -> Patch:
    """All pairwise combinations a + sign*b inside out_box, deduplicated."""
    if pa.dim != pb.dim:
        raise DimensionMismatch(f"{pa.dim} vs {pb.dim}")
    n_pairs = pa.size * pb.size
    if n_pairs > _PAIR_BUDGET:
        raise RegionTooLarge(f"{n_pairs} candidate pairs")
    exact = pa.same_frame(pb) if sign < 0 else (
        pa.exact and pb.exact
        and np.array_equal(pa.basis.matrix, pb.basis.matrix)
        and np.allclose(pa.offset + pb.offset, 0.0, atol=_DUP_TOL))
    pts_chunks: List[np.ndarray] = []
    coef_chunks: List[np.ndarray] = []
    chunk = max(1, _PAIR_BUDGET // max(pb.size, 1) // 50)
    for start in range(0, pa.size, chunk):
        block = pa.points[start:start + chunk]
        cand = (block[:, None, :] + sign * pb.points[None, :, :]).reshape(-1, pa.dim)
        mask = out_box.contains(cand)
        pts_chunks.append(cand[mask])
        if exact:
            cc = (pa.coeffs[start:start + chunk][:, None, :]
                  + sign * pb.coeffs[None, :, :]).reshape(-1, pa.coeffs.shape[1])
            coef_chunks.append(cc[mask])
    pts = np.concatenate(pts_chunks) if pts_chunks else np.zeros((0, pa.dim))
    if exact:
        coeffs = np.concatenate(coef_chunks) if coef_chunks else np.zeros((0, pa.coeffs.shape[1]), np.int64)
        coeffs, idx = np.unique(coeffs, axis=0, return_index=True)
        # recompute points from coefficients: canonical and frame-exact
        pts = pb.basis.points_of(coeffs)[:, :pa.dim]
        inside = out_box.contains(pts) if len(pts) else np.zeros(0, dtype=bool)
        return Patch(pts[inside], out_box, coeffs[inside], pa.basis, np.zeros(pa.dim))
    return Patch(pts, out_box)


def difference_set(patch: Patch, radius: float) -> Patch:
    """Lambda = P - P truncated to [-radius, radius)^d.

    Complete on that box provided radius <= half the smallest extent side
    (points realizing a small difference then fit inside the extent).
    """
    if radius > _half_sides(patch.extent):
        raise RadiusExceedsValidity(f"radius {radius} > half extent side {_half_sides(patch.extent)}")
    return _pairwise(patch, patch, -1, centered_box(radius, patch.dim))


def iterated_sumset(patch: Patch, k: int, radius: float) -> Patch:
    """k-fold sumset P + ... + P truncated to [-radius, radius)^d.

    Validity: k * radius must fit inside the extent half-side, so every sum
    reachable with parts from the extent is kept until the final truncation
    (partial sums are never truncated).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k * radius > _half_sides(patch.extent):
        raise RadiusExceedsValidity(
            f"k*radius {k * radius} > half extent side {_half_sides(patch.extent)}")
    acc = patch
    for j in range(1, k):
        # any part is bounded by the extent, so partial j-sums live in j*extent
        bound = centered_box((j + 1) * _half_sides(patch.extent), patch.dim)
        acc = _pairwise(acc, patch, +1, bound)
    return acc.restrict(centered_box(radius, patch.dim)) if k > 1 else \
        patch.restrict(centered_box(radius, patch.dim))


@dataclass(frozen=True)
class WitnessReport:
    """Greedy finite-cover witness for Lambda + Lambda subset Lambda + F."""

    ok: bool
    F: np.ndarray
    F_coeffs: Optional[np.ndarray]
    n_sumset: int
    uncovered: Tuple[int, ...] = field(default=())

    @property
    def size(self) -> int:
        return len(self.F)


def _order_by_norm_then_lex(points: np.ndarray, coeffs: Optional[np.ndarray]) -> np.ndarray:
    norms = np.linalg.norm(points, axis=1)
    if coeffs is not None:
        keys = list(coeffs.T[::-1]) + [norms]
    else:
        keys = list(points.T[::-1]) + [norms]
    return np.lexsort(keys)


def approx_subgroup_witness(patch: Patch, radius: float, gap_tol: float = MATCH_TOL) -> WitnessReport:
    """Greedy witness F with (Lambda + Lambda) cap B_radius subset Lambda + F.

    Lambda must be symmetric and containted 0.  Elements s of the truncated
    sumset are processed by increasing norm; s is covered when s - f lands in
    Lambda for some established f, else f := s - (nearest Lambda point to s)
    joins F.  A bounded, radius-stable F is the approximate-lattice signature.
    """
    if patch.size == 0:
        raise EmptyPatch("witness needs a nonempty patch")
    norms = np.linalg.norm(patch.points, axis=1)
    if np.min(norms) > _DUP_TOL:
        raise ValueError("0 must belong to the patch")
    tree = cKDTree(patch.points)
    d_sym, _ = tree.query(-patch.points)
    if np.max(d_sym) > gap_tol:
        raise ValueError("patch must be symmetric")

    sumset = iterated_sumset(patch, 2, radius)
    order = _order_by_norm_then_lex(sumset.points, sumset.coeffs)
    s_pts = sumset.points[order]
    s_coef = sumset.coeffs[order] if sumset.coeffs is not None else None
    exact = s_coef is not None and patch.coeffs is not None and sumset.same_frame(patch)
    lam_keys = patch.coeff_keys() if exact else None

    F_pts: List[np.ndarray] = []
    F_coef: List[np.ndarray] = []
    uncovered: List[int] = []
    lam_lo, lam_hi = patch.extent.lo, patch.extent.hi
    for idx in range(len(s_pts)):
        s = s_pts[idx]
        covered = False
        for fi in range(len(F_pts)):
            cand = s - F_pts[fi]
            if np.any(cand < lam_lo) or np.any(cand >= lam_hi):
                continue
            if exact:
                if tuple((s_coef[idx] - F_coef[fi]).tolist()) in lam_keys:
                    covered = True
                    break
            else:
                d, _ = tree.query(cand)
                if d <= gap_tol:
                    covered = True
                    break
        if covered:
            continue
        d, j = tree.query(s)
        # nearest lattice point always exists; new residual covers s by design
        F_pts.append(s - patch.points[j])
        if exact:
            F_coef.append(s_coef[idx] - patch.coeffs[j])
    F = np.array(F_pts) if F_pts else np.zeros((0, patch.dim))
    Fc = np.array(F_coef, dtype=np.int64) if exact and F_coef else None
    return WitnessReport(ok=not uncovered, F=F, F_coeffs=Fc,
                         n_sumset=sumset.size, uncovered=tuple(uncovered))


def patch_distance(p: Patch, q: Patch, R: float, resolution: float = 1e-4) -> float:
    """Local matching distance: the smallest eps in (0, 1] such that inside
    [-min(R, 1/eps), min(R, 1/eps))^d every point of either patch has a
    partner of the other within eps.  Returns 0.0 for identical patches and
    1.0 when even eps = 1 fails.  Bisection at `resolution`.
    """
    if p.dim != q.dim:
        raise DimensionMismatch(f"{p.dim} vs {q.dim}")
    box_r = centered_box(R, p.dim)
    _require_covers(p.extent, box_r)
    _require_covers(q.extent, box_r)
    tree_q = cKDTree(q.points) if q.size else None
    tree_p = cKDTree(p.points) if p.size else None
    d_pq = tree_q.query(p.points)[0] if (p.size and q.size) else np.full(p.size, np.inf)
    d_qp = tree_p.query(q.points)[0] if (p.size and q.size) else np.full(q.size, np.inf)

    def check(eps: float) -> bool:
        r = R if eps <= 0 else min(R, 1.0 / eps)
        box = centered_box(r, p.dim)
        in_p = box.contains(p.points) if p.size else np.zeros(0, dtype=bool)
        in_q = box.contains(q.points) if q.size else np.zeros(0, dtype=bool)
        ok_p = np.all(d_pq[in_p] <= eps) if in_p.any() else True
        ok_q = np.all(d_qp[in_q] <= eps) if in_q.any() else True
        return bool(ok_p and ok_q)

    if check(0.0):
        return 0.0
    if not check(1.0):
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if check(mid):
            hi = mid
        else:
            lo = mid
    return hi


def accumulation_margin(a: Patch, b: Patch, radius: float) -> float:
    """Min Euclidean norm over nonzero elements of (a + b) cap B_radius.

    Positive margin certifies no accumulation at the identity within the
    truncation box; returns inf when only 0 (or nothing) lies inside.
    """
    if radius > min(_half_sides(a.extent), _half_sides(b.extent)):
        raise RadiusExceedsValidity("radius beyond sumset validity")
    s = _pairwise(a, b, +1, centered_box(radius, a.dim))
    if s.size == 0:
        return float("inf")
    norms = np.linalg.norm(s.points, axis=1)
    nz = norms > _DUP_TOL
    if s.coeffs is not None:
        nz = np.any(s.coeffs != 0, axis=1)
    if not np.any(nz):
        return float("inf")
    return float(np.min(norms[nz]))


def return_time_set(patches: Sequence[Patch], radius: float,
                    match_tol: float = MATCH_TOL) -> Patch:
    """Common points of all patches inside [-radius, radius)^d.

    Matching is exact through lattice coefficients when every patch shares
    the same frame; otherwise points within `match_tol` are identified and
    the cluster centroid is returned.
    """
    if not patches:
        raise ValueError("need at least one patch")
    box = centered_box(radius, patches[0].dim)
    for p in patches:
        _require_covers(p.extent, box)
    first = patches[0].restrict(box)
    if len(patches) == 1:
        return first
    exact = all(patches[0].same_frame(p) for p in patches[1:])
    if exact:
        keys = first.coeff_keys()
        for p in patches[1:]:
            keys &= p.coeff_keys()
        if not keys:
            return Patch(np.zeros((0, first.dim)), box,
                         np.zeros((0, first.coeffs.shape[1]), np.int64),
                         first.basis, first.offset)
        coeffs = np.array(sorted(keys), dtype=np.int64)
        pts = first.basis.points_of(coeffs)[:, :first.dim] - first.offset
        return Patch(pts, box, coeffs, first.basis, first.offset)
    acc = first.points.copy()
    current = first.points
    alive = np.ones(len(current), dtype=bool)
    for p in patches[1:]:
        if not alive.any() or p.size == 0:
            return Patch(np.zeros((0, first.dim)), box)
        tree = cKDTree(p.points)
        d, idx = tree.query(current)
        hit = d <= match_tol
        alive &= hit
        acc[hit] += p.points[idx[hit]]
    pts = acc[alive] / float(len(patches))
    return Patch(pts, box)
