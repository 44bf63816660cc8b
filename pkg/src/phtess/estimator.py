"""Type densities over growing balls.

Two counts are kept for every combinatorial type and every radius ``n`` of
a ladder: cells contained in ``B_n`` and cells whose circumcenter lies in
``B_n``.  Divided by the volume of ``B_n`` both converge to the same
density.  Only cells that are exact cells of the unbounded tessellation are
counted (minus-sampling); the ladder is capped so that no such cell can be
missed.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .combinatorics import TypeFingerprint, canonical_type, type_catalog_lookup
from .geometry import CellPolytope, ball_volume, extract_cells, max_safe_radius
from .sampler import ProcessSample, make_rng

__all__ = [
    "CensusRadiusError",
    "TypeCensus",
    "census",
    "DensityCurve",
    "density_curve",
    "tail_relative_variation",
    "SandwichReport",
    "sandwich_check",
    "aggregate",
]


class CensusRadiusError(ValueError):
    def __init__(self, requested, max_safe):
        self.requested = requested
        self.max_safe = max_safe
        super().__init__(f"radius {requested:g} exceeds the largest safe radius {max_safe:.6g}")


@dataclass
class TypeCensus:
    dimension: int
    radii: np.ndarray
    contained: dict = field(default_factory=dict)   # fingerprint -> counts per radius
    centered: dict = field(default_factory=dict)
    max_safe_radius: float = math.inf
    seed: int | None = None

    @property
    def volumes(self):
        return np.array([ball_volume(n, self.dimension) for n in self.radii])

    @property
    def fingerprints(self):
        """Observed types, most frequent (centered, largest radius) first."""
        return sorted(self.centered, key=lambda f: (-self.centered[f][-1], -self.contained[f][-1], f.hex))

    def counts(self, fp):
        zero = np.zeros(len(self.radii), dtype=np.int64)
        return self.contained.get(fp, zero), self.centered.get(fp, zero)

    def total(self, which="centered"):
        table = self.centered if which == "centered" else self.contained
        out = np.zeros(len(self.radii), dtype=np.int64)
        for c in table.values():
            out += c
        return out

    def mean_vertex_count(self, which="centered"):
        table = self.centered if which == "centered" else self.contained
        num = np.zeros(len(self.radii))
        for fp, c in table.items():
            num += fp.n_vertices * c
        tot = self.total(which)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(tot > 0, num / np.maximum(tot, 1), np.nan)

    def rows(self):
        """``(n, fingerprint, name, contained, centered, dens_contained, dens_centered)``."""
        vol = self.volumes
        for fp in self.fingerprints:
            a, b = self.counts(fp)
            for i, n in enumerate(self.radii):
                yield (float(n), fp, type_catalog_lookup(fp), int(a[i]), int(b[i]),
                       a[i] / vol[i], b[i] / vol[i])


def census(cells, radii, window_radius=None, origin=None, max_diameter=None, types=None):
    """Count cells per combinatorial type for each radius in ``radii``.

    ``cells`` is the output of :func:`~phtess.geometry.extract_cells`.
    ``origin`` shifts all balls; ``max_diameter`` restricts counting to cells
    of diameter at most that value.  ``types`` may carry precomputed
    fingerprints, aligned with ``cells``.
    """
    radii = np.asarray(sorted(float(n) for n in radii))
    cells = list(cells)
    d = cells[0].dimension if cells else None
    if d is None:
        return TypeCensus(0, radii)
    o = np.zeros(d) if origin is None else np.asarray(origin, dtype=float)
    safe = _max_safe(cells, window_radius, o)
    if len(radii) and radii[-1] > safe:
        raise CensusRadiusError(radii[-1], safe)
    out = TypeCensus(d, radii, max_safe_radius=safe)
    top = radii[-1] if len(radii) else -1.0
    for k, cell in enumerate(cells):
        if not cell.trusted:
            continue
        if max_diameter is not None and cell.diameter > max_diameter:
            continue
        # the circumcenter lies in the cell, within one diameter of every vertex
        if np.min(np.linalg.norm(cell.vertices - o, axis=1)) > top + cell.diameter:
            continue
        rc = float(np.linalg.norm(cell.center - o))
        if rc > top:
            continue
        rv = float(np.max(np.linalg.norm(cell.vertices - o, axis=1)))
        fp = types[k] if types is not None else canonical_type(cell)
        if fp not in out.centered:
            out.centered[fp] = np.zeros(len(radii), dtype=np.int64)
            out.contained[fp] = np.zeros(len(radii), dtype=np.int64)
        out.centered[fp] += radii >= rc
        out.contained[fp] += radii >= rv
    return out


def _max_safe(cells, window_radius, origin):
    if not np.any(origin):
        return max_safe_radius(cells, window_radius)
    from .geometry import distance_to_polytope

    bound = math.inf
    for c in cells:
        if not c.trusted:
            bound = min(bound, distance_to_polytope(origin, c.vertices) - 1e-8)
    return bound


def tail_relative_variation(values):
    """Largest deviation from the mean over the last third of a curve, relative to that mean.

    Infinite when the tail mean is zero.
    """
    v = np.asarray(values, dtype=float)
    k = max(1, math.ceil(len(v) / 3))
    tail = v[-k:]
    m = tail.mean()
    if m <= 0:
        return math.inf
    return float(np.max(np.abs(tail - m)) / m)


@dataclass
class DensityCurve:
    radii: np.ndarray
    contained: np.ndarray
    centered: np.ndarray

    @property
    def ratio(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.centered > 0, self.contained / np.where(self.centered > 0, self.centered, 1), np.nan)

    @property
    def tail_variation(self):
        return tail_relative_variation(self.centered)

    @property
    def tail_max_deviation(self):
        """Largest gap between the two estimators over the last third, relative to the centered one."""
        k = max(1, math.ceil(len(self.radii) / 3))
        c, a = self.centered[-k:], self.contained[-k:]
        if np.all(c == 0):
            return 0.0 if np.all(a == 0) else math.inf
        return float(np.max(np.abs(a - c)) / np.max(c))


def density_curve(census_or_list, fingerprint) -> DensityCurve:
    """Density of one type against radius, for one census or averaged over several."""
    items = census_or_list if isinstance(census_or_list, (list, tuple)) else [census_or_list]
    first = items[0]
    vol = first.volumes
    a = np.zeros(len(first.radii))
    b = np.zeros(len(first.radii))
    for c in items:
        ca, cb = c.counts(fingerprint)
        a += ca
        b += cb
    return DensityCurve(first.radii, a / (vol * len(items)), b / (vol * len(items)))


def aggregate(censuses):
    """Pooled counts of several censuses sharing one ladder (sorted-seed fold)."""
    censuses = sorted(censuses, key=lambda c: (c.seed is None, c.seed))
    first = censuses[0]
    out = TypeCensus(first.dimension, first.radii,
                     max_safe_radius=min(c.max_safe_radius for c in censuses))
    for c in censuses:
        if not np.array_equal(c.radii, first.radii):
            raise ValueError("censuses use different radius ladders")
        for fp in c.centered:
            a, b = c.counts(fp)
            if fp not in out.centered:
                out.centered[fp] = np.zeros(len(first.radii), dtype=np.int64)
                out.contained[fp] = np.zeros(len(first.radii), dtype=np.int64)
            out.centered[fp] += b
            out.contained[fp] += a
    return out


# ---------------------------------------------------------------------------
# sandwich inequalities

@dataclass
class SandwichReport:
    n: float
    lower: float
    lower_se: float
    middle: float
    upper: float
    upper_se: float
    n_points: int
    sigmas: float = 3.0

    @property
    def lower_holds(self):
        return self.lower - self.sigmas * self.lower_se <= self.middle

    @property
    def upper_holds(self):
        return self.middle <= self.upper + self.sigmas * self.upper_se

    @property
    def holds(self):
        return self.lower_holds and self.upper_holds


def _uniform_ball(rng, n, radius, d):
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * (radius * rng.random(n) ** (1.0 / d))[:, None]


def _ball_integral(tree, n_centers, radius, d, rng, n_points):
    """MC estimate of the integral over ``t`` in ``B_radius`` of ``#centers in B(t, 1)``."""
    vol = ball_volume(radius, d)
    if n_centers == 0 or radius <= 0:
        return 0.0, 0.0
    t = _uniform_ball(rng, n_points, radius, d)
    k = tree.query_ball_point(t, 1.0, return_length=True).astype(float)
    return vol * float(k.mean()), vol * float(k.std(ddof=1)) / math.sqrt(n_points)


def sandwich_check(cells, predicate, n, window_radius=None, seed=0, n_points=10_000, sigmas=3.0):
    """Evaluate the two-sided bound around ``lambda(B_1) f(B_n)``.

    ``f(B)`` counts cells satisfying ``predicate`` whose circumcenter is in
    ``B``.  The lower and upper sides integrate ``f(B_1 + t)`` over ``t`` in
    ``B_{n-1}`` and ``B_{n+1}`` by Monte Carlo with ``n_points`` points.
    ``cells`` may also be a :class:`ProcessSample`.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if isinstance(cells, ProcessSample):
        window_radius = cells.radius if window_radius is None else window_radius
        cells = extract_cells(cells, window_radius)
    cells = list(cells)
    d = cells[0].dimension
    safe = max_safe_radius(cells, window_radius)
    if n + 2 > safe:
        raise CensusRadiusError(n + 2, safe)
    centers = np.array([c.center for c in cells if c.trusted and predicate(c)]).reshape(-1, d)
    norms = np.linalg.norm(centers, axis=1)
    middle = ball_volume(1.0, d) * float(np.sum(norms <= n))
    tree = cKDTree(centers) if len(centers) else None
    rng = make_rng(seed, int(round(1000 * n)))
    lo, lo_se = _ball_integral(tree, len(centers), n - 1, d, rng, n_points)
    hi, hi_se = _ball_integral(tree, len(centers), n + 1, d, rng, n_points)
    return SandwichReport(float(n), lo, lo_se, middle, hi, hi_se, n_points, sigmas)


def type_predicate(fingerprint):
    """Predicate selecting cells of one combinatorial type."""
    return lambda cell: canonical_type(cell) == fingerprint


def all_cells(cell):
    return True
