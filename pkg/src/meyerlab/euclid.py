"""Euclidean lattice geometry: bases, half-open boxes, and exact point enumeration.

Conventions used throughout the package:

* A lattice is given by a square basis matrix whose *columns* are the
  generators; a lattice point is an exact integer coefficient vector c,
  with real coordinates ``matrix @ c`` derived on demand.
* Every box is axis-aligned and half-open, ``[lo, hi)`` componentwise.
* ``enumerate_lattice`` is complete and exact: it returns precisely the
  lattice points inside the region, in canonical lexicographic-
  by-coefficients order, or raises ``RegionTooLarge`` when the candidate
  count exceeds its budget.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import product
from typing import Tuple

import numpy as np

from .errors import DimensionMismatch, RegionTooLarge, SingularBasis, WindowTooSmall

# Relative tolerance shared by singularity checks and enumeration slack.
REL_TOL = 1e-9

# Default cap on candidate coefficient vectors visited per enumeration.
DEFAULT_BUDGET = 50_000_000

# Dense corner-box path materializes the full integer grid; keep it in RAM.
_DENSE_CAP = 2_000_000


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned half-open box [lo, hi); lo_i <= hi_i componentwise."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self) -> None:
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise DimensionMismatch(f"box bounds {lo.shape} vs {hi.shape}")
        if np.any(hi < lo):
            raise ValueError(f"box has hi < lo: lo={lo}, hi={hi}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    @property
    def sides(self) -> np.ndarray:
        return self.hi - self.lo

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Half-open membership mask for an (N, dim) array (or a single point)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            raise DimensionMismatch(f"points dim {pts.shape[1]} vs box dim {self.dim}")
        mask = np.all(pts >= self.lo, axis=1) & np.all(pts < self.hi, axis=1)
        return mask if np.asarray(points).ndim > 1 else bool(mask[0])

    def corners(self) -> np.ndarray:
        """All 2^dim corner points, shape (2^dim, dim)."""
        cols = [(self.lo[i], self.hi[i]) for i in range(self.dim)]
        return np.array(list(product(*cols)), dtype=float)

    def translate(self, shift: np.ndarray) -> "Box":
        shift = np.asarray(shift, dtype=float)
        return Box(self.lo + shift, self.hi + shift)

    def __repr__(self) -> str:
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


class Window(Box):
    """Internal-space box with nonempty interior (every side strictly positive)."""

    def __post_init__(self) -> None:
        super().__post_init__()
        if np.any(self.hi - self.lo <= 0.0):
            raise WindowTooSmall(f"window sides must be positive: {self.sides}")


def centered_box(radius: float, dim: int) -> Box:
    """The box [-radius, radius)^dim."""
    r = float(radius)
    return Box(np.full(dim, -r), np.full(dim, r))


def box_intersect(a: Box, b: Box) -> Box:
    """Intersection; disjoint inputs collapse to an empty box of volume 0."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"box dims {a.dim} vs {b.dim}")
    lo = np.maximum(a.lo, b.lo)
    hi = np.maximum(np.minimum(a.hi, b.hi), lo)
    return Box(lo, hi)


def box_volume(a: Box) -> float:
    return a.volume


def box_erode(a: Box, eps: float) -> Box:
    """Shrink every face inward by eps; over-eroded boxes collapse to volume 0."""
    if eps < 0:
        raise ValueError("erosion distance must be nonnegative")
    lo = a.lo + eps
    hi = np.maximum(a.hi - eps, lo)
    return Box(lo, hi)


def box_dilate(a: Box, eps: float) -> Box:
    """Grow every face outward by eps."""
    if eps < 0:
        raise ValueError("dilation distance must be nonnegative")
    return Box(a.lo - eps, a.hi + eps)


@dataclass(frozen=True, eq=False)
class LatticeBasis:
    """Full-rank lattice basis; columns of `matrix` are the generators."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"basis matrix must be square, got {m.shape}")
        scale = float(np.max(np.abs(m)))
        if abs(float(np.linalg.det(m))) <= REL_TOL * scale ** m.shape[0]:
            raise SingularBasis(f"|det|={abs(float(np.linalg.det(m))):.3e} below tolerance")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def covolume(self) -> float:
        return abs(float(np.linalg.det(self.matrix)))

    @cached_property
    def inverse(self) -> np.ndarray:
        inv = np.linalg.inv(self.matrix)
        inv.flags.writeable = False
        return inv

    def points_of(self, coeffs: np.ndarray) -> np.ndarray:
        """Real coordinates of integer coefficient vectors, shape preserved."""
        return np.asarray(coeffs, dtype=float) @ self.matrix.T

    def __repr__(self) -> str:
        return f"LatticeBasis({self.matrix.tolist()})"


def covolume(basis: LatticeBasis) -> float:
    """Covolume |det| of the lattice: volume of a fundamental parallelepiped."""
    return basis.covolume


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------


def _coefficient_corner_bounds(basis: LatticeBasis, region: Box) -> Tuple[np.ndarray, np.ndarray]:
    """Exact per-coefficient integer ranges from the region's corner preimages.

    A single coefficient is a linear functional of the point, so its range
    over a box is attained at corners; slack guards float rounding only.
    """
    cc = region.corners() @ basis.inverse.T
    slack = REL_TOL * (np.max(np.abs(cc)) + 1.0)
    lo_c = np.ceil(cc.min(axis=0) - slack)
    hi_c = np.floor(cc.max(axis=0) + slack)
    return lo_c.astype(np.int64), hi_c.astype(np.int64)


def _dense_coeffs(lo_c: np.ndarray, hi_c: np.ndarray) -> np.ndarray:
    axes = [np.arange(l, h + 1, dtype=np.int64) for l, h in zip(lo_c, hi_c)]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _ragged_arange(starts: np.ndarray, counts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Concatenate arange(starts[i], starts[i]+counts[i]); also return row ids."""
    counts = counts.astype(np.int64)
    total = int(counts.sum())
    rows = np.repeat(np.arange(len(counts)), counts)
    offs = np.arange(total, dtype=np.int64) - np.repeat(np.cumsum(counts) - counts, counts)
    return np.repeat(starts.astype(np.int64), counts) + offs, rows


def _interval_counts(lo_b: np.ndarray, hi_b: np.ndarray, ok: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Integer counts per row for real intervals [lo_b, hi_b] with rounding slack."""
    with np.errstate(invalid="ignore"):
        slack = REL_TOL * (np.maximum(np.abs(lo_b), np.abs(hi_b)) + 1.0)
        c_lo = np.ceil(lo_b - slack)
        c_hi = np.floor(hi_b + slack)
        counts = np.where(ok & np.isfinite(c_lo) & np.isfinite(c_hi),
                          np.maximum(c_hi - c_lo + 1, 0), 0)
    c_lo = np.where(counts > 0, c_lo, 0.0)
    return c_lo, counts


def _sliced_coeffs_2d(basis: LatticeBasis, region: Box, lo_c: np.ndarray,
                      hi_c: np.ndarray, budget: int) -> np.ndarray:
    """Exact 2D enumeration: sweep one coefficient, solve the other by intervals."""
    m = basis.matrix
    spans = hi_c - lo_c + 1
    j = int(np.argmin(spans))
    i = 1 - j
    if spans[j] > budget:
        raise RegionTooLarge(f"outer sweep of {spans[j]} exceeds budget {budget}")
    v = np.arange(lo_c[j], hi_c[j] + 1, dtype=np.int64)
    lo_b = np.full(v.shape, -np.inf)
    hi_b = np.full(v.shape, np.inf)
    ok = np.ones(v.shape, dtype=bool)
    for k in range(2):
        r_lo = region.lo[k] - m[k, j] * v
        r_hi = region.hi[k] - m[k, j] * v
        a = m[k, i]
        if a == 0.0:
            ok &= (r_lo <= 0.0) & (r_hi > 0.0)
        elif a > 0.0:
            lo_b = np.maximum(lo_b, r_lo / a)
            hi_b = np.minimum(hi_b, r_hi / a)
        else:
            lo_b = np.maximum(lo_b, r_hi / a)
            hi_b = np.minimum(hi_b, r_lo / a)
    c_lo, counts = _interval_counts(lo_b, hi_b, ok)
    if counts.sum() > budget:
        raise RegionTooLarge(f"{int(counts.sum())} candidates exceed budget {budget}")
    ci, rows = _ragged_arange(c_lo, counts)
    coeffs = np.empty((len(ci), 2), dtype=np.int64)
    coeffs[:, i] = ci
    coeffs[:, j] = v[rows]
    return coeffs


def _sliced_coeffs_3d(basis: LatticeBasis, region: Box, lo_c: np.ndarray,
                      hi_c: np.ndarray, budget: int) -> np.ndarray:
    """Exact 3D enumeration: sweep the widest coefficient, bound the middle one
    by eliminating the innermost from the box constraints, solve the rest by
    intervals.  All bounds carry rounding slack; the caller's final half-open
    filter keeps the result exact."""
    m = basis.matrix
    spans = hi_c - lo_c + 1
    j = int(np.argmax(spans))
    p, q = [k for k in range(3) if k != j]
    if spans[p] < spans[q]:
        p, q = q, p
    if spans[j] > budget:
        raise RegionTooLarge(f"outer sweep of {spans[j]} exceeds budget {budget}")
    v = np.arange(lo_c[j], hi_c[j] + 1, dtype=np.int64).astype(float)

    # Rows with a q-component give q in [L_k, U_k), both affine in (m_p, v)
    # with a shared slope; rows without one constrain (m_p, v) directly.
    slopes, consts_l, consts_u, direct = [], [], [], []
    for k in range(3):
        a = m[k, q]
        if a == 0.0:
            direct.append(k)
            continue
        lo_k, hi_k = (region.lo[k], region.hi[k]) if a > 0.0 else (region.hi[k], region.lo[k])
        slopes.append((-m[k, p] / a, -m[k, j] / a))
        consts_l.append(lo_k / a)
        consts_u.append(hi_k / a)

    # Range of the middle coefficient per outer value: pair every lower bound
    # L_k with every upper bound U_k' (one Fourier-Motzkin elimination step).
    mp_lo = np.full(v.shape, -np.inf)
    mp_hi = np.full(v.shape, np.inf)
    ok = np.ones(v.shape, dtype=bool)
    for (ap, av), cl in zip(slopes, consts_l):
        for (bp, bv), du in zip(slopes, consts_u):
            coef_p = ap - bp
            rhs = (bv - av) * v + (du - cl)
            if coef_p > 0.0:
                mp_hi = np.minimum(mp_hi, rhs / coef_p)
            elif coef_p < 0.0:
                mp_lo = np.maximum(mp_lo, rhs / coef_p)
            else:
                ok &= rhs >= 0.0
    for k in direct:
        r_lo = region.lo[k] - m[k, j] * v
        r_hi = region.hi[k] - m[k, j] * v
        a = m[k, p]
        if a == 0.0:
            ok &= (r_lo <= 0.0) & (r_hi > 0.0)
        elif a > 0.0:
            mp_lo = np.maximum(mp_lo, r_lo / a)
            mp_hi = np.minimum(mp_hi, r_hi / a)
        else:
            mp_lo = np.maximum(mp_lo, r_hi / a)
            mp_hi = np.minimum(mp_hi, r_lo / a)
    mp_lo = np.maximum(mp_lo, float(lo_c[p]))
    mp_hi = np.minimum(mp_hi, float(hi_c[p]))
    ok &= np.isfinite(mp_lo) & np.isfinite(mp_hi)
    mp_lo = np.where(ok, mp_lo, 0.0)
    mp_hi = np.where(ok, mp_hi, -1.0)
    c_lo, counts = _interval_counts(mp_lo, mp_hi, ok)
    if counts.sum() > budget:
        raise RegionTooLarge(f"{int(counts.sum())} mid-level candidates exceed budget {budget}")
    mp, rows = _ragged_arange(c_lo, counts)
    vj = v[rows].astype(np.int64)
    mpf = mp.astype(float)
    vjf = vj.astype(float)

    # Innermost coefficient: plain interval intersection per (outer, middle).
    lo_b = np.full(mp.shape, -np.inf)
    hi_b = np.full(mp.shape, np.inf)
    ok2 = np.ones(mp.shape, dtype=bool)
    for k in range(3):
        a = m[k, q]
        if a == 0.0:
            continue
        r_lo = (region.lo[k] - m[k, j] * vjf - m[k, p] * mpf) / a
        r_hi = (region.hi[k] - m[k, j] * vjf - m[k, p] * mpf) / a
        if a > 0.0:
            lo_b = np.maximum(lo_b, r_lo)
            hi_b = np.minimum(hi_b, r_hi)
        else:
            lo_b = np.maximum(lo_b, r_hi)
            hi_b = np.minimum(hi_b, r_lo)
    c_lo2, counts2 = _interval_counts(lo_b, hi_b, ok2)
    if counts2.sum() > budget:
        raise RegionTooLarge(f"{int(counts2.sum())} candidates exceed budget {budget}")
    cq, rows2 = _ragged_arange(c_lo2, counts2)
    coeffs = np.empty((len(cq), 3), dtype=np.int64)
    coeffs[:, j] = vj[rows2]
    coeffs[:, p] = mp[rows2]
    coeffs[:, q] = cq
    return coeffs


def enumerate_lattice(basis: LatticeBasis, region: Box,
                      budget: int = DEFAULT_BUDGET) -> Tuple[np.ndarray, np.ndarray]:
    """All lattice points inside the half-open region.

    Returns ``(coeffs, points)``: integer coefficient vectors (N, n) and their
    real coordinates (N, n), sorted lexicographically by coefficients.
    Complete (no misses) and exact: candidates come from the integer corner
    box of ``inverse @ region`` (swept coefficient-by-coefficient when the
    dense grid would not fit), then pass the strict half-open membership
    filter.  Raises ``RegionTooLarge`` when the candidate count exceeds
    ``budget``.
    """
    n = basis.dim
    if region.dim != n:
        raise DimensionMismatch(f"region dim {region.dim} vs lattice dim {n}")
    empty = (np.zeros((0, n), dtype=np.int64), np.zeros((0, n)))
    if region.volume == 0.0:
        return empty
    lo_c, hi_c = _coefficient_corner_bounds(basis, region)
    spans = hi_c - lo_c + 1
    if np.any(spans <= 0):
        return empty
    total = float(np.prod(spans.astype(float)))
    if total <= min(_DENSE_CAP, budget):
        coeffs = _dense_coeffs(lo_c, hi_c)
    elif n == 2:
        coeffs = _sliced_coeffs_2d(basis, region, lo_c, hi_c, budget)
    elif n == 3:
        coeffs = _sliced_coeffs_3d(basis, region, lo_c, hi_c, budget)
    else:
        raise RegionTooLarge(
            f"{total:.3e} corner-box candidates exceed budget {budget} "
            f"and no sweep is available in dimension {n}")
    points = coeffs @ basis.matrix.T
    mask = region.contains(points) if len(points) else np.zeros(0, dtype=bool)
    coeffs = coeffs[mask]
    points = points[mask]
    if len(coeffs):
        order = np.lexsort(coeffs.T[::-1])
        coeffs = coeffs[order]
        points = points[order]
    return coeffs, points
