"""Cells of a hyperplane arrangement clipped to a box, and their metric data."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import linprog, nnls
from scipy.spatial import ConvexHull, HalfspaceIntersection
from scipy.spatial.distance import pdist

from .constants import BALL_TOL, ON_PLANE_TOL, VERTEX_DEDUP_TOL, WINDOW

__all__ = [
    "Ball",
    "CellPolytope",
    "DegenerateArrangementError",
    "PolytopeError",
    "VertexEnumeration",
    "extract_cells",
    "vertex_enumeration",
    "polytope_from_halfspaces",
    "polytope_from_vertices",
    "circumcenter",
    "diameter",
    "polytope_volume",
    "ball_volume",
    "distance_to_polytope",
    "max_safe_radius",
    "min_width",
]


class DegenerateArrangementError(RuntimeError):
    """Raised when hyperplanes are not in general position within tolerance."""

    def __init__(self, ids, message=""):
        self.ids = tuple(sorted({int(i) for i in ids if i != WINDOW}))
        self.involves_window = any(i == WINDOW for i in ids)
        text = f"degenerate arrangement involving hyperplanes {list(self.ids)}"
        if self.involves_window:
            text += " and the window boundary"
        super().__init__(f"{text}{': ' + message if message else ''}")


class PolytopeError(ValueError):
    """Empty, unbounded or lower-dimensional polytope."""


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")

    def contains(self, points, tol=BALL_TOL):
        p = np.atleast_2d(points)
        return np.linalg.norm(p - self.center, axis=1) <= self.radius + tol


def ball_volume(radius, d):
    """Lebesgue measure of a ``d``-ball."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * radius ** d


class CellPolytope:
    """A bounded full-dimensional polytope with its facet-vertex incidence.

    Facet ``j`` is ``{x : normals[j] . x <= offsets[j]}`` with a unit outer
    normal.  ``sources[j]`` is the id of the generating hyperplane (or
    ``WINDOW``) and ``sides[j]`` tells on which side of that hyperplane, in
    its canonical orientation, the cell lies.
    """

    def __init__(self, vertices, normals, offsets, incidence, sources=None, sides=None,
                 trusted_radius=math.inf, check=True):
        self.vertices = np.asarray(vertices, dtype=float)
        self.normals = np.asarray(normals, dtype=float)
        self.offsets = np.asarray(offsets, dtype=float)
        self.incidence = tuple(tuple(int(i) for i in f) for f in incidence)
        m = len(self.incidence)
        self.sources = tuple(range(m)) if sources is None else tuple(int(s) for s in sources)
        self.sides = (-1,) * m if sides is None else tuple(int(s) for s in sides)
        self.trusted_radius = trusted_radius
        if check:
            self._validate()

    @property
    def dimension(self):
        return self.vertices.shape[1]

    def _validate(self):
        V, d = self.vertices, self.dimension
        m = len(self.incidence)
        if not (len(self.normals) == len(self.offsets) == len(self.sources) == len(self.sides) == m):
            raise PolytopeError("facet data of inconsistent length")
        if len(V) < d + 1:
            raise PolytopeError(f"a {d}-polytope needs at least {d + 1} vertices, got {len(V)}")
        sv = np.linalg.svd(V - V.mean(axis=0), compute_uv=False)
        if sv[-1] <= VERTEX_DEDUP_TOL * max(1.0, sv[0]):
            raise PolytopeError("vertices do not span a full-dimensional polytope")
        if any(len(f) < d for f in self.incidence):
            raise PolytopeError("every facet needs at least d vertices")
        counts = np.zeros(len(V), dtype=int)
        for f in self.incidence:
            counts[list(f)] += 1
        if np.any(counts < d):
            raise PolytopeError("every vertex must lie on at least d facets")

    @property
    def n_facets(self):
        return len(self.incidence)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def touches_window(self):
        return WINDOW in self.sources

    @cached_property
    def vertex_facets(self):
        """For each vertex, the indices of the facets containing it."""
        out = [[] for _ in range(self.n_vertices)]
        for j, f in enumerate(self.incidence):
            for v in f:
                out[v].append(j)
        return tuple(tuple(x) for x in out)

    @cached_property
    def max_vertex_norm(self):
        return float(np.max(np.linalg.norm(self.vertices, axis=1)))

    @property
    def trusted(self):
        """Whether this is a genuine cell of the unbounded tessellation.

        Only hyperplanes meeting the sampling ball are simulated, so a cell is
        trusted when it avoids the window and lies inside that ball.
        """
        return not self.touches_window and self.max_vertex_norm <= self.trusted_radius

    @cached_property
    def circumball(self):
        return circumcenter(self.vertices)

    @property
    def center(self):
        return self.circumball.center

    @cached_property
    def diameter(self):
        return diameter(self.vertices)

    @cached_property
    def volume(self):
        return polytope_volume(self.vertices, self.incidence, self.normals, self.offsets)

    @cached_property
    def f_vector(self):
        from .combinatorics import f_vector
        return f_vector(self.incidence, self.n_vertices, self.dimension)

    def contains(self, points, tol=None):
        p = np.atleast_2d(points)
        lim = ON_PLANE_TOL * (1 + np.linalg.norm(p, axis=1)) if tol is None else tol
        return np.all(p @ self.normals.T - self.offsets <= np.reshape(lim, (-1, 1)), axis=1)

    def distance_from_origin_lower_bound(self):
        """max over facets of the violation at the origin; 0 if the origin is inside."""
        return float(max(0.0, np.max(-self.offsets)))

    def transformed(self, matrix, shift):
        """Image under ``x -> matrix @ x + shift`` (same combinatorics)."""
        Mx = np.asarray(matrix, dtype=float)
        t = np.asarray(shift, dtype=float)
        V = self.vertices @ Mx.T + t
        if np.linalg.det(Mx) == 0:
            raise ValueError("affine map must be invertible")
        N = self.normals @ np.linalg.inv(Mx)
        b = self.offsets + N @ t
        scale = np.linalg.norm(N, axis=1)
        return CellPolytope(V, N / scale[:, None], b / scale, self.incidence,
                            self.sources, self.sides)

    def __repr__(self):
        return (f"CellPolytope(d={self.dimension}, facets={self.n_facets}, "
                f"vertices={self.n_vertices}, window={self.touches_window})")


# ---------------------------------------------------------------------------
# arrangement cells by recursive splitting

class _Region:
    __slots__ = ("V", "M", "A", "b", "src", "side")

    def __init__(self, V, M, A, b, src, side):
        self.V, self.M, self.A, self.b, self.src, self.side = V, M, A, b, src, side


def _box_region(d, r):
    A = np.zeros((2 * d, d))
    b = np.full(2 * d, float(r))
    side = []
    for k in range(d):
        A[2 * k, k] = 1.0        # x_k <= r
        A[2 * k + 1, k] = -1.0   # x_k >= -r
        side += [-1, 1]
    signs = np.array(list(itertools.product((1.0, -1.0), repeat=d)))
    V = signs * r
    M = np.zeros((len(V), 2 * d), dtype=bool)
    for k in range(d):
        M[:, 2 * k] = signs[:, k] > 0
        M[:, 2 * k + 1] = signs[:, k] < 0
    return _Region(V, M, A, b, [WINDOW] * (2 * d), side)


def _split(reg, u, tau, hid, s, d):
    neg = s < 0
    pos = ~neg
    Mn = reg.M[neg]
    Mp = reg.M[pos]
    common = Mn.astype(np.int32) @ Mp.T.astype(np.int32)
    ii, jj = np.nonzero(common == d - 1)
    Vn, Vp = reg.V[neg], reg.V[pos]
    sn, sp = s[neg][ii], s[pos][jj]
    lam = (sn / (sn - sp))[:, None]
    X = Vn[ii] + lam * (Vp[jj] - Vn[ii])
    Mx = Mn[ii] & Mp[jj]
    k = len(reg.b)
    children = []
    for keep, Vk, Mk, a, off, sd in ((neg, Vn, Mn, u, tau, -1), (pos, Vp, Mp, -u, -tau, 1)):
        V = np.vstack([Vk, X])
        M = np.zeros((len(V), k + 1), dtype=bool)
        M[:len(Vk), :k] = Mk
        M[len(Vk):, :k] = Mx
        M[len(Vk):, k] = True
        live = M.any(axis=0)
        M = M[:, live]
        A = np.vstack([reg.A, a[None, :]])[live]
        b = np.append(reg.b, off)[live]
        src = [x for x, l in zip(reg.src + [hid], live) if l]
        side = [x for x, l in zip(reg.side + [sd], live) if l]
        per_vertex = M.sum(axis=1)
        per_facet = M.sum(axis=0)
        if np.any(per_vertex != d) or np.any(per_facet < d):
            bad = set(src)
            raise DegenerateArrangementError(bad, "non-simple cell produced by a split")
        children.append(_Region(V, M, A, b, src, side))
    return children


def extract_cells(sample, window_radius=None, check_degeneracy=True):
    """All cells of the arrangement of ``sample`` inside the box ``[-r, r]^d``.

    The box circumscribes the ball of radius ``r = window_radius`` (default:
    the sample radius).  Cells come back sorted by vertex centroid.  A
    hyperplane passing within tolerance of an existing vertex raises
    :class:`DegenerateArrangementError` naming the hyperplanes involved.
    """
    d = sample.dimension
    r = float(sample.radius if window_radius is None else window_radius)
    if r > sample.radius * (1 + 1e-12):
        raise ValueError(f"window radius {r} exceeds sample radius {sample.radius}")
    U, tau, ids = sample.normals, sample.offsets, sample.ids
    hits = np.abs(tau) < r * np.abs(U).sum(axis=1)
    cand0 = np.nonzero(hits)[0]

    out = []
    stack = [(_box_region(d, r), cand0)]
    while stack:
        reg, cand = stack.pop()
        if len(cand):
            S = reg.V @ U[cand].T - tau[cand]
            tolv = ON_PLANE_TOL * (1.0 + np.linalg.norm(reg.V, axis=1))
            near = np.abs(S) <= tolv[:, None]
            if near.any():
                vi, ci = np.argwhere(near)[0]
                involved = [reg.src[j] for j in np.nonzero(reg.M[vi])[0]] + [ids[cand[ci]]]
                raise DegenerateArrangementError(involved, "hyperplane passes through a vertex")
            cut = (S.min(axis=0) < 0) & (S.max(axis=0) > 0)
            cand = cand[cut]
            if len(cand):
                h = cand[0]
                s = S[:, np.nonzero(cut)[0][0]]
                minus, plus = _split(reg, U[h], tau[h], int(ids[h]), s, d)
                rest = cand[1:]
                stack.append((plus, rest))
                stack.append((minus, rest))
                continue
        out.append(_finalize(reg, sample.radius))
    out.sort(key=lambda c: tuple(c.vertices.mean(axis=0)))
    return out


def _finalize(reg, trusted_radius):
    inc = [tuple(np.nonzero(reg.M[:, j])[0]) for j in range(reg.M.shape[1])]
    return CellPolytope(reg.V, reg.A, reg.b, inc, reg.src, reg.side,
                        trusted_radius=trusted_radius, check=False)


def max_safe_radius(cells, window_radius=None):
    """Largest ``n`` such that every cell meeting ``B_n`` is trusted.

    Untrusted cells (window-clipped, or reaching outside the sampled ball)
    may be fragments of true cells; if none of them meets ``B_n``, every true
    cell with its center in ``B_n`` has been extracted exactly.
    """
    bound = math.inf if window_radius is None else float(window_radius)
    for c in cells:
        if c.trusted or c.distance_from_origin_lower_bound() >= bound:
            continue
        exact = distance_to_polytope(np.zeros(c.dimension), c.vertices)
        bound = min(bound, max(c.distance_from_origin_lower_bound(), exact - VERTEX_DEDUP_TOL))
    return bound


# ---------------------------------------------------------------------------
# halfspace form -> vertices

@dataclass
class VertexEnumeration:
    vertices: np.ndarray
    incidence: tuple
    normals: np.ndarray
    offsets: np.ndarray
    facet_rows: tuple          # row of the input each facet came from
    redundant: tuple           # input rows that are not facets


def _normalize_rows(A, b):
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    n = np.linalg.norm(A, axis=1)
    if np.any(n == 0):
        raise PolytopeError("zero normal in halfspace list")
    return A / n[:, None], b / n


def _affine_rank(P):
    if len(P) <= 1:
        return 0
    sv = np.linalg.svd(P - P[0], compute_uv=False)
    return int(np.sum(sv > VERTEX_DEDUP_TOL * max(1.0, sv[0])))


def _positively_spanning(A):
    """Whether the rows of ``A`` positively span R^d (i.e. ``A x <= b`` is bounded)."""
    m, d = A.shape
    if m <= d:
        return False
    try:
        hull = ConvexHull(A)
    except Exception:
        return False
    return bool(np.all(hull.equations[:, -1] < -1e-12))


def vertex_enumeration(A, b, interior_point=None) -> VertexEnumeration:
    """Vertices and facet incidence of ``{x : A x <= b}``.

    Redundant rows (not defining a facet, or duplicating an earlier facet)
    are dropped and reported in ``redundant``.  A known strictly interior
    point skips the feasibility linear programs.
    """
    A, b = _normalize_rows(A, b)
    m, d = A.shape
    if interior_point is not None:
        x0 = np.asarray(interior_point, dtype=float)
        if np.any(A @ x0 - b >= -VERTEX_DEDUP_TOL):
            raise PolytopeError("interior point is not strictly inside")
        if not _positively_spanning(A):
            raise PolytopeError("halfspaces define an unbounded region")
        return _enumerate_from(A, b, x0)
    for k in range(d):
        for sgn in (1.0, -1.0):
            c = np.zeros(d)
            c[k] = -sgn
            res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * d, method="highs")
            if res.status == 2:
                raise PolytopeError("halfspaces have empty intersection")
            if res.status == 3:
                raise PolytopeError("halfspaces define an unbounded region")
    # Chebyshev center as interior point
    c = np.zeros(d + 1)
    c[-1] = -1.0
    Aub = np.hstack([A, np.ones((m, 1))])
    res = linprog(c, A_ub=Aub, b_ub=b, bounds=[(None, None)] * d + [(0, None)], method="highs")
    if res.status != 0 or res.x[-1] <= VERTEX_DEDUP_TOL:
        raise PolytopeError("halfspaces do not bound a full-dimensional polytope")
    return _enumerate_from(A, b, res.x[:d])


def _enumerate_from(A, b, interior):
    m, d = A.shape
    hs = HalfspaceIntersection(np.hstack([A, -b[:, None]]), interior)
    pts = []
    for p in hs.intersections:
        if not any(np.linalg.norm(p - q) <= VERTEX_DEDUP_TOL * (1 + np.linalg.norm(q)) for q in pts):
            pts.append(p)
    V = np.array(pts)
    tol = ON_PLANE_TOL * 10 * (1 + np.linalg.norm(V, axis=1))
    T = np.abs(V @ A.T - b) <= tol[:, None]
    facets, redundant, seen = [], [], set()
    for i in range(m):
        verts = tuple(np.nonzero(T[:, i])[0])
        if len(verts) < d or _affine_rank(V[list(verts)]) < d - 1 or verts in seen:
            redundant.append(i)
            continue
        seen.add(verts)
        facets.append(i)
    # snap each vertex onto its tight facets
    for v in range(len(V)):
        rows = [i for i in facets if T[v, i]]
        V[v] = np.linalg.lstsq(A[rows], b[rows], rcond=None)[0]
    return VertexEnumeration(V, tuple(tuple(np.nonzero(T[:, i])[0]) for i in facets),
                             A[facets], b[facets], tuple(facets), tuple(redundant))


def polytope_from_halfspaces(A, b, interior_point=None) -> CellPolytope:
    ve = vertex_enumeration(A, b, interior_point)
    return CellPolytope(ve.vertices, ve.normals, ve.offsets, ve.incidence,
                        sources=ve.facet_rows)


def polytope_from_vertices(points) -> CellPolytope:
    """The convex hull of ``points`` as a :class:`CellPolytope`."""
    P = np.asarray(points, dtype=float)
    hull = ConvexHull(P)
    eq = hull.equations
    rows = []
    for e in eq:
        if not any(np.allclose(e, f, atol=1e-9) for f in rows):
            rows.append(e)
    rows = np.array(rows)
    return polytope_from_halfspaces(rows[:, :-1], -rows[:, -1])


# ---------------------------------------------------------------------------
# metric data

def _circumsphere(S):
    c0 = S[0]
    if len(S) == 1:
        return c0.copy(), 0.0
    Q = S[1:] - c0
    G = Q @ Q.T
    alpha = np.linalg.lstsq(2.0 * G, np.diag(G), rcond=None)[0]
    c = c0 + alpha @ Q
    return c, float(np.max(np.sum((S - c) ** 2, axis=1)))


def circumcenter(points) -> Ball:
    """Smallest enclosing ball (Welzl's algorithm, move-to-front form)."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.size == 0:
        raise ValueError("circumcenter of an empty point set")
    d = P.shape[1]
    scale = max(1.0, float(np.max(np.abs(P))))
    slack = 1e-13 * scale * scale
    order = list(range(len(P)))

    def mtf(end, support):
        if support:
            c, r2 = _circumsphere(P[support])
        else:
            c, r2 = P[order[0]].copy(), -1.0
        if len(support) == d + 1:
            return c, r2
        i = 0
        while i < end:
            p = order[i]
            if np.sum((P[p] - c) ** 2) > r2 + slack:
                c, r2 = mtf(i, support + [p])
                order.insert(0, order.pop(i))
            i += 1
        return c, r2

    c, r2 = mtf(len(P), [])
    r = math.sqrt(max(r2, 0.0))
    r = max(r, float(np.max(np.linalg.norm(P - c, axis=1))))
    return Ball(c, r)


def diameter(points) -> float:
    """Largest distance between two of ``points`` (or vertices of a cell)."""
    V = points.vertices if isinstance(points, CellPolytope) else np.asarray(points, dtype=float)
    if len(V) < 2:
        return 0.0
    return float(np.max(pdist(V)))


def _polygon_area(P):
    c = P.mean(axis=0)
    ang = np.arctan2(P[:, 1] - c[1], P[:, 0] - c[0])
    Q = P[np.argsort(ang)]
    x, y = Q[:, 0], Q[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _facet_area_3d(P, normal):
    # orthonormal basis of the facet plane
    e1 = P[1] - P[0]
    e1 = e1 - (e1 @ normal) * normal
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(normal, e1)
    return _polygon_area(np.column_stack([(P - P[0]) @ e1, (P - P[0]) @ e2]))


def polytope_volume(vertices, incidence=None, normals=None, offsets=None):
    """Volume of a convex polytope.

    Uses the shoelace formula in the plane, a pyramid decomposition over
    facets in 3-space and Qhull above that.
    """
    V = np.asarray(vertices, dtype=float)
    d = V.shape[1]
    if d == 2:
        return _polygon_area(V)
    if d == 3 and incidence is not None:
        c = V.mean(axis=0)
        vol = 0.0
        for f, n, b in zip(incidence, normals, offsets):
            h = b - n @ c
            vol += h * _facet_area_3d(V[list(f)], n) / 3.0
        return float(vol)
    return float(ConvexHull(V).volume)


def distance_to_polytope(point, vertices):
    """Euclidean distance from ``point`` to the hull of ``vertices``."""
    q = np.asarray(point, dtype=float)
    V = np.asarray(vertices, dtype=float)
    scale = 1e4 * max(1.0, float(np.max(np.abs(V))), float(np.max(np.abs(q))))
    # min |V^T lam - q| over the simplex, with the affine constraint as a heavy row
    M = np.vstack([V.T, np.full(len(V), scale)])
    rhs = np.append(q, scale)
    lam, _ = nnls(M, rhs)
    lam /= lam.sum()
    return float(np.linalg.norm(lam @ V - q))


def min_width(points):
    """Smallest width of the hull of ``points`` over all directions.

    The width in direction ``u`` is the support function of the difference
    body ``W - W``; its minimum over unit vectors is the distance from the
    origin to the nearest facet hyperplane of that body.  Returns 0 when the
    points do not span the space.
    """
    P = np.asarray(points, dtype=float)
    d = P.shape[1]
    if d == 1:
        return float(P.max() - P.min())
    if _affine_rank(P) < d:
        return 0.0
    diff = (P[:, None, :] - P[None, :, :]).reshape(-1, d)
    hull = ConvexHull(diff)
    return float(np.min(-hull.equations[:, -1]))
