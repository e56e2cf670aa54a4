"""Cut-and-project schemes: model sets, the hull torus, and window oracles.

A scheme is a full-rank lattice in R^(d+m) together with a half-open window
W in the internal factor R^m.  Physical projection p(gamma) takes the first
d coordinates, the star map takes the last m.  The model set at transversal
parameter w is Q_w = { p(gamma) : gamma* + w in W }; a hull point (u, w)
carries the translated patch Q_(u,w) = { p(gamma) - u : gamma* + w in W }.

Conventions: the group acts by g.Q = Q - g, so a return time g = p(gamma) of
Q_w moves w to w + gamma*; all analytic predictions are window volumes over
the covolume, and the transverse measure is normalized to total mass
vol(W)/covol (not a probability).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import (
    DimensionMismatch,
    NotAReturnTime,
    WindowTooSmall,
)
from .euclid import (
    DEFAULT_BUDGET,
    Box,
    LatticeBasis,
    Window,
    box_erode,
    box_intersect,
    enumerate_lattice,
)
from .pointset import Patch


@dataclass(frozen=True, eq=False)
class Scheme:
    """Cut-and-project data: lattice basis, split d + m, window in R^m."""

    basis: LatticeBasis
    d: int
    m: int
    window: Window

    def __post_init__(self) -> None:
        if self.d < 1 or self.m < 1:
            raise DimensionMismatch("need d >= 1 and m >= 1")
        if self.basis.dim != self.d + self.m:
            raise DimensionMismatch(
                f"basis dim {self.basis.dim} != d + m = {self.d + self.m}")
        if self.window.dim != self.m:
            raise DimensionMismatch(
                f"window dim {self.window.dim} != m = {self.m}")

    @property
    def dim_total(self) -> int:
        return self.d + self.m

    @property
    def covolume(self) -> float:
        return self.basis.covolume

    def phys(self, x: np.ndarray) -> np.ndarray:
        """First d coordinates of points given as (..., d+m) arrays."""
        return np.asarray(x, dtype=float)[..., : self.d]

    def star(self, x: np.ndarray) -> np.ndarray:
        """Last m coordinates (internal space) of (..., d+m) arrays."""
        return np.asarray(x, dtype=float)[..., self.d:]

    def star_of_coeffs(self, coeffs: np.ndarray) -> np.ndarray:
        return self.star(self.basis.points_of(coeffs))

    def full_region(self, phys_box: Box, internal_box: Box) -> Box:
        if phys_box.dim != self.d or internal_box.dim != self.m:
            raise DimensionMismatch("phys/internal box dims do not match scheme")
        return Box(np.concatenate([phys_box.lo, internal_box.lo]),
                   np.concatenate([phys_box.hi, internal_box.hi]))


@dataclass(frozen=True, eq=False)
class TransversalPoint:
    """Window parameter w in W; margin is its distance to the boundary."""

    w: np.ndarray
    margin: float = 0.0

    @staticmethod
    def of(scheme: Scheme, w: np.ndarray) -> "TransversalPoint":
        w = np.atleast_1d(np.asarray(w, dtype=float))
        win = scheme.window
        if not win.contains(w[None, :])[0]:
            raise NotAReturnTime(f"parameter {w} outside window")
        margin = float(min(np.min(w - win.lo), np.min(win.hi - w)))
        return TransversalPoint(w, margin)


@dataclass(frozen=True, eq=False)
class HullPoint:
    """Torus point (u, w); its patch is { p(gamma) - u : gamma* + w in W }.

    Representatives are reduced once, at construction, into a fundamental
    parallelepiped of the patch-preserving lattice { (p(gamma), -gamma*) }
    (same covolume as the scheme lattice); they are never re-reduced, since
    the patch map is a function of the stored representative.
    """

    u: np.ndarray
    w: np.ndarray

    @staticmethod
    def of(u: np.ndarray, w: np.ndarray) -> "HullPoint":
        return HullPoint(np.atleast_1d(np.asarray(u, dtype=float)),
                         np.atleast_1d(np.asarray(w, dtype=float)))

    @staticmethod
    def reduce(scheme: Scheme, u: np.ndarray, w: np.ndarray) -> "HullPoint":
        """Canonical representative of (u, w) modulo the patch-preserving
        lattice, inside its fundamental parallelepiped."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        w = np.atleast_1d(np.asarray(w, dtype=float))
        mirror = scheme.basis.matrix.copy()
        mirror[scheme.d:, :] *= -1.0
        x = np.concatenate([u, w])
        c = np.linalg.solve(mirror, x)
        rep = mirror @ (c - np.floor(c))
        return HullPoint(rep[: scheme.d], rep[scheme.d:])

    def translate(self, g: np.ndarray) -> "HullPoint":
        """The action g.x = (u + g, w): the patch translates to Q - g."""
        return HullPoint(self.u + np.asarray(g, dtype=float), self.w)


def model_set(scheme: Scheme, z: TransversalPoint, region: Box,
              budget: int = DEFAULT_BUDGET) -> Patch:
    """Q_w intersected with the half-open physical region, as an exact patch.

    Contains 0 whenever 0 lies in the region (gamma = 0 always qualifies),
    and restricting the region restricts the patch.
    """
    internal = scheme.window.translate(-z.w)
    coeffs, pts = enumerate_lattice(scheme.basis, scheme.full_region(region, internal), budget)
    return Patch(pts[:, : scheme.d], region, coeffs, scheme.basis,
                 np.zeros(scheme.d))


def hull_patch(scheme: Scheme, x: HullPoint, region: Box,
               budget: int = DEFAULT_BUDGET) -> Patch:
    """Patch of the hull point (u, w) on `region`: model-set points minus u."""
    phys = region.translate(x.u)
    internal = scheme.window.translate(-x.w)
    coeffs, pts = enumerate_lattice(scheme.basis, scheme.full_region(phys, internal), budget)
    return Patch(pts[:, : scheme.d] - x.u, region, coeffs, scheme.basis,
                 x.u.copy())


def act(scheme: Scheme, z: TransversalPoint, gamma_coeffs: np.ndarray) -> TransversalPoint:
    """Move z by the return time p(gamma): the new parameter is w + gamma*.

    gamma must actually be a return time (gamma* + w in W), else
    NotAReturnTime.
    """
    c = np.asarray(gamma_coeffs, dtype=np.int64)
    if c.shape != (scheme.dim_total,):
        raise DimensionMismatch(f"coefficient vector shape {c.shape}")
    star = scheme.star(scheme.basis.points_of(c))
    return TransversalPoint.of(scheme, z.w + star)


def predicted_density(scheme: Scheme) -> float:
    """Analytic point density of any model set of the scheme: vol(W)/covol."""
    return scheme.window.volume / scheme.covolume


def predicted_intersection_density(scheme: Scheme,
                                   zs: Sequence[TransversalPoint]) -> float:
    """Analytic density of the common return times of Q_(w_1), ..., Q_(w_r):
    vol of the intersected shifted windows over the covolume."""
    if not zs:
        raise ValueError("need at least one transversal point")
    box = scheme.window.translate(-zs[0].w)
    for z in zs[1:]:
        box = box_intersect(box, scheme.window.translate(-z.w))
    return box.volume / scheme.covolume


def intersection_window(scheme: Scheme, zs: Sequence[TransversalPoint]) -> Box:
    """The window cap_k (W - w_k) whose model set is the common return set."""
    box = scheme.window.translate(-zs[0].w)
    for z in zs[1:]:
        box = box_intersect(box, scheme.window.translate(-z.w))
    return box


def sample_transversal(scheme: Scheme, rng_seed: int, margin: float) -> TransversalPoint:
    """Uniform parameter on the window eroded by `margin` (kept away from the
    boundary, where patches are unstable).  Deterministic in the seed."""
    return _sample_transversal(scheme, np.random.default_rng(rng_seed), margin)


def _sample_transversal(scheme: Scheme, rng: np.random.Generator,
                        margin: float) -> TransversalPoint:
    eroded = box_erode(scheme.window, margin)
    if eroded.volume <= 0.0:
        raise WindowTooSmall(f"margin {margin} leaves no window volume")
    w = eroded.lo + rng.random(scheme.m) * eroded.sides
    return TransversalPoint.of(scheme, w)


def sample_hull(scheme: Scheme, rng_seed: int) -> HullPoint:
    """Haar-uniform hull point: B @ c with c uniform on [0,1)^(d+m)."""
    us, ws = _sample_hull_batch(scheme, np.random.default_rng(rng_seed), 1)
    return HullPoint(us[0], ws[0])


def _sample_hull_batch(scheme: Scheme, rng: np.random.Generator,
                       n: int) -> Tuple[np.ndarray, np.ndarray]:
    # Haar on the hull torus: the parametrization (u, w) -> patch is
    # invariant under (p(gamma), -gamma*), so draw from the fundamental
    # parallelepiped of that mirrored lattice.
    c = rng.random((n, scheme.dim_total))
    x = c @ scheme.basis.matrix.T
    return x[:, : scheme.d], -x[:, scheme.d:]


def internal_infimum_trace(scheme: Scheme, t_values: Sequence[float],
                           budget: int = DEFAULT_BUDGET) -> List[Tuple[float, float]]:
    """min over nonzero gamma with p(gamma) in [-t, t)^d of |gamma*|_sup,
    per t.  A strictly decreasing trace certifies dense internal projection
    (irrationality); a zero value flags exact physical lattice directions.
    """
    rows: List[Tuple[float, float]] = []
    s = float(max(np.max(scheme.window.sides), 1.0))
    for t in t_values:
        found = None
        cap = s
        for _ in range(60):
            region = scheme.full_region(
                Box(np.full(scheme.d, -t), np.full(scheme.d, t)),
                Box(np.full(scheme.m, -cap), np.full(scheme.m, cap)))
            coeffs, pts = enumerate_lattice(scheme.basis, region, budget)
            nz = np.any(coeffs != 0, axis=1)
            if np.any(nz):
                found = float(np.min(np.max(np.abs(pts[nz, scheme.d:]), axis=1)))
                break
            cap *= 2.0
        rows.append((float(t), found if found is not None else float("inf")))
        if found is not None and found > 0.0:
            s = min(s, found * 1.001)
    return rows


# ---------------------------------------------------------------------------
# scheme (de)serialization
# ---------------------------------------------------------------------------


def scheme_from_dict(data: dict) -> Scheme:
    """Build a scheme from {"d", "m", "basis" (row-major), "window": {lo, hi}}."""
    for key in ("d", "m", "basis", "window"):
        if key not in data:
            raise KeyError(f"scheme JSON missing key '{key}'")
    basis = LatticeBasis(np.array(data["basis"], dtype=float))
    window = Window(np.array(data["window"]["lo"], dtype=float),
                    np.array(data["window"]["hi"], dtype=float))
    return Scheme(basis, int(data["d"]), int(data["m"]), window)


def scheme_to_dict(scheme: Scheme) -> dict:
    return {
        "d": scheme.d,
        "m": scheme.m,
        "basis": scheme.basis.matrix.tolist(),
        "window": {"lo": scheme.window.lo.tolist(), "hi": scheme.window.hi.tolist()},
    }


def load_scheme(path: str) -> Scheme:
    with open(path, "r", encoding="utf-8") as fh:
        return scheme_from_dict(json.load(fh))


def save_scheme(scheme: Scheme, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scheme_to_dict(scheme), fh, indent=2, sort_keys=True)
        fh.write("\n")
