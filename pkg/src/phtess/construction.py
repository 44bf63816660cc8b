"""Hyperplanes close to the facets of a target polytope.

For a simple polytope ``P`` with circumcenter at the origin and facets
``F_1, ..., F_m`` (indexed from 0 here), ``A_j`` is the set of hyperplanes
meeting every ball ``B(v, eps)`` around a vertex ``v`` of ``F_j`` and ``C``
holds the remaining hyperplanes that meet ``P + B``, where ``B`` is the unit
ball.  If the process puts exactly one hyperplane in every ``A_j`` and none
in ``C``, the cell around the origin is a polytope ``Q`` close to ``P``.

A hyperplane lies in ``A_j`` iff the width ``w_j(u)`` of ``vert F_j`` in its
normal direction is at most ``2 eps`` and its offset is in an interval of
length ``2 eps - w_j(u)``, so::

    Theta(A_j) = gamma * int max(0, 2 eps - w_j(u)) phi(du)
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .combinatorics import canonical_type, is_simple, reference_polytope
from .geometry import (
    CellPolytope,
    PolytopeError,
    circumcenter,
    diameter,
    distance_to_polytope,
    extract_cells,
    min_width,
    polytope_from_halfspaces,
    polytope_from_vertices,
)
from .model import (
    AtomicDistribution,
    DirectionalDistribution,
    Estimate,
    ProcessIntensity,
    hitting_mean,
    polytope_support,
)
from .sampler import ProcessSample, make_rng, sample_process

__all__ = [
    "TargetSpec",
    "Certificate",
    "CertificationRefused",
    "CertificationRequired",
    "BulletViolation",
    "EventOutcome",
    "EventProbability",
    "BulletReport",
    "target_polytope",
    "in_Aj",
    "in_C",
    "class_membership",
    "classify_event",
    "facet_class_measure",
    "event_probability",
    "certify_epsilon0",
    "draw_class_hyperplane",
    "bullet_checks",
    "event_polytope",
    "verify_bullet_on_event",
    "event_realization",
]

DEFAULT_DRAWS = 1000
_BULLET_TOL = 1e-9


class CertificationRefused(RuntimeError):
    def __init__(self, certificate):
        self.certificate = certificate
        super().__init__(f"certification refused: {certificate.reason}")


class CertificationRequired(RuntimeError):
    """The event formula needs pairwise disjoint classes, which is not certified."""


class BulletViolation(AssertionError):
    def __init__(self, report):
        self.report = report
        failed = [k for k, (ok, _) in report.checks.items() if not ok]
        super().__init__(f"bullet checks failed: {', '.join(failed)}")


# ---------------------------------------------------------------------------
# targets

def target_polytope(name):
    """Named construction targets.

    ``square`` and ``cube`` are axis-parallel with unit edges; other names go
    to :func:`~phtess.combinatorics.reference_polytope`.
    """
    if name == "square":
        return polytope_from_vertices([[0, 0], [1, 0], [1, 1], [0, 1]])
    if name == "cube":
        return polytope_from_vertices(
            np.array(list(itertools.product([0.0, 1.0], repeat=3))))
    if name.startswith("simplex-"):
        # regular simplex: the corner simplex has its circumcenter on a facet
        d = int(name.split("-")[1])
        E = np.eye(d + 1) - 1.0 / (d + 1)
        basis = np.linalg.qr(E[:, :d])[0]
        return polytope_from_vertices(E @ basis)
    return reference_polytope(name)


def _as_polytope(P):
    if isinstance(P, TargetSpec):
        return P.polytope
    if isinstance(P, CellPolytope):
        return P
    if isinstance(P, str):
        return target_polytope(P)
    return polytope_from_vertices(np.asarray(P, dtype=float))


class TargetSpec:
    """A simple polytope recentred at its circumcenter, with ``eps`` and ``D``.

    ``P`` is a catalog name, a vertex array or a polytope.  ``certificate``
    is attached by :meth:`build` or :meth:`certify`; the event probability
    refuses to run without a granted one.
    """

    def __init__(self, P, eps, D, name=None, certificate=None):
        poly = _as_polytope(P)
        if not is_simple(poly):
            raise PolytopeError("target polytope must be simple")
        if not (0 < eps <= 1):
            raise ValueError(f"eps must lie in (0, 1], got {eps!r}")
        c = circumcenter(poly.vertices).center
        V = poly.vertices - c
        self.polytope = CellPolytope(V, poly.normals, poly.offsets - poly.normals @ c,
                                     poly.incidence)
        if np.min(self.polytope.offsets) <= 0:
            raise PolytopeError("circumcenter lies on the boundary of the target polytope")
        self.eps = float(eps)
        self.D = float(D)
        self.name = name if name is not None else (P if isinstance(P, str) else "custom")
        self.certificate = certificate
        self.fingerprint = canonical_type(self.polytope)
        self.circumradius = float(np.max(np.linalg.norm(V, axis=1)))

    @classmethod
    def build(cls, P, eps, D, name=None, draws=DEFAULT_DRAWS, seed=0):
        spec = cls(P, eps, D, name)
        cert = spec.certify(draws, seed)
        if not cert.granted:
            raise CertificationRefused(cert)
        return spec

    def certify(self, draws=DEFAULT_DRAWS, seed=0):
        self.certificate = certify_epsilon0(self, self.eps, self.D, draws, seed)
        return self.certificate

    @property
    def certified(self):
        return self.certificate is not None and self.certificate.granted

    @property
    def dimension(self):
        return self.polytope.dimension

    @property
    def m(self):
        return self.polytope.n_facets

    @property
    def vertices(self):
        return self.polytope.vertices

    @property
    def facet_vertices(self):
        return [self.polytope.vertices[list(f)] for f in self.polytope.incidence]

    @property
    def facet_normals(self):
        return self.polytope.normals

    def to_dict(self):
        return {"name": self.name, "d": self.dimension, "eps": self.eps, "D": self.D,
                "m": self.m, "vertices": self.vertices.tolist(),
                "fingerprint": self.fingerprint.hex}

    def __repr__(self):
        return f"TargetSpec({self.name}, d={self.dimension}, m={self.m}, eps={self.eps}, D={self.D})"


# ---------------------------------------------------------------------------
# hyperplane classes

def _uv(H):
    if hasattr(H, "normal"):
        return np.asarray(H.normal, dtype=float), float(H.offset)
    u, t = H
    return np.asarray(u, dtype=float), float(t)


def in_Aj(H, spec: TargetSpec, j) -> bool:
    """Whether ``H`` meets ``B(v, eps)`` for every vertex ``v`` of facet ``j`` (0-based)."""
    if not 0 <= j < spec.m:
        raise IndexError(f"facet index {j} out of range 0..{spec.m - 1}")
    u, t = _uv(H)
    return bool(np.all(np.abs(spec.facet_vertices[j] @ u - t) <= spec.eps))


def _hits_enlarged(u, t, V):
    proj = np.atleast_2d(u) @ V.T
    return (proj.min(axis=1) - 1.0 <= t) & (t <= proj.max(axis=1) + 1.0)


def in_C(H, spec: TargetSpec) -> bool:
    """Whether ``H`` meets ``P + B`` without belonging to any ``A_j``."""
    u, t = _uv(H)
    if not _hits_enlarged(u, np.array([t]), spec.vertices)[0]:
        return False
    return not any(in_Aj((u, t), spec, j) for j in range(spec.m))


def class_membership(normals, offsets, spec: TargetSpec):
    """Vectorised classes: ``(A, C)`` with ``A[i, j] = H_i in A_j`` and ``C[i] = H_i in C``."""
    U = np.asarray(normals, dtype=float).reshape(-1, spec.dimension)
    t = np.asarray(offsets, dtype=float).reshape(-1)
    A = np.zeros((len(t), spec.m), dtype=bool)
    for j, F in enumerate(spec.facet_vertices):
        A[:, j] = np.all(np.abs(U @ F.T - t[:, None]) <= spec.eps, axis=1)
    C = _hits_enlarged(U, t, spec.vertices) & ~A.any(axis=1)
    return A, C


@dataclass(frozen=True)
class EventOutcome:
    occurred: bool
    a_counts: tuple
    c_count: int
    a_ids: tuple
    c_ids: tuple
    overlaps: int = 0   # hyperplanes in two or more classes


def classify_event(sample: ProcessSample, spec: TargetSpec) -> EventOutcome:
    """Count sample hyperplanes per class and decide whether the event occurred."""
    need = spec.circumradius + 1.0 + spec.eps
    if sample.radius < need:
        raise ValueError(f"sample radius {sample.radius:g} below {need:g}")
    A, C = class_membership(sample.normals, sample.offsets, spec)
    a_ids = tuple(tuple(int(i) for i in sample.ids[A[:, j]]) for j in range(spec.m))
    a_counts = tuple(len(x) for x in a_ids)
    c_ids = tuple(int(i) for i in sample.ids[C])
    occurred = all(k == 1 for k in a_counts) and not c_ids
    return EventOutcome(occurred, a_counts, len(c_ids), a_ids, c_ids,
                        int(np.sum(A.sum(axis=1) > 1)))


# ---------------------------------------------------------------------------
# exact event probability

@dataclass(frozen=True)
class EventProbability:
    value: float
    error: float
    theta_a: tuple
    theta_c: Estimate
    hit: Estimate
    converged: bool

    def to_dict(self):
        return {"value": self.value, "error": self.error,
                "theta_a": [asdict(e) for e in self.theta_a],
                "theta_c": asdict(self.theta_c), "hit": asdict(self.hit),
                "converged": self.converged}


def _tangent_basis(n):
    """Orthonormal basis of the hyperplane orthogonal to ``n`` (as columns)."""
    q, _ = np.linalg.qr(np.column_stack([n, np.eye(len(n))]))
    return q[:, 1:len(n)]


_GL = {k: np.polynomial.legendre.leggauss(k) for k in (16, 24, 32, 48, 64)}


def _gauss(a, b, k):
    x, w = _GL[k]
    h = 0.5 * (b - a)
    return a + h * (x + 1.0), h * w


def _weight(dist, u):
    return np.broadcast_to(np.asarray(dist._weight(u), dtype=float), (len(u),))


def _facet_integral_2d(F, n, eps, dist, k):
    e = _tangent_basis(n)[:, 0]
    L = abs(float((F[1] - F[0]) @ e))
    s = 2 * eps / L
    t = s / math.sqrt(1 - s * s)
    total = 0.0
    for a, b in ((-t, 0.0), (0.0, t)):
        y, w = _gauss(a, b, k)
        u = (n[None, :] + y[:, None] * e[None, :]) / np.sqrt(1 + y * y)[:, None]
        g = (2 * eps - L * np.abs(y) / np.sqrt(1 + y * y)) / (1 + y * y)
        total += float(np.sum(w * g * _weight(dist, u)))
    # both half-circles around +-n contribute alike
    return 2 * total / (2 * math.pi)


def _facet_integral_3d(F, n, eps, dist, k):
    E = _tangent_basis(n)
    p = F @ E
    breaks = []
    for i, j in itertools.combinations(range(len(p)), 2):
        dx, dy = p[j] - p[i]
        a = math.atan2(dy, dx)
        breaks += [a + math.pi / 2, a - math.pi / 2]
    b = np.unique(np.mod(breaks, 2 * math.pi))
    b = np.append(b, b[0] + 2 * math.pi)
    total = 0.0
    for lo, hi in zip(b[:-1], b[1:]):
        if hi - lo < 1e-15:
            continue
        al, wa = _gauss(lo, hi, k)
        for alpha, wal in zip(al, wa):
            dirn = np.array([math.cos(alpha), math.sin(alpha)])
            proj = p @ dirn
            W = float(proj.max() - proj.min())
            rstar = 2 * eps / math.sqrt(W * W - 4 * eps * eps)
            r, wr = _gauss(0.0, rstar, k)
            y = np.outer(r, E @ dirn)
            u = (n[None, :] + y) / np.sqrt(1 + r * r)[:, None]
            g = (2 * eps - r * W / np.sqrt(1 + r * r)) * r / (1 + r * r) ** 1.5
            total += wal * float(np.sum(wr * g * _weight(dist, u)))
    return 2 * total / (4 * math.pi)


def _facet_integral_mc(F, n, eps, dist, t, seed, draws=200_000):
    d = len(n)
    E = _tangent_basis(n)
    rng = make_rng(seed, 7)
    g = rng.standard_normal((draws, d - 1))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    y = g * (t * rng.random(draws) ** (1.0 / (d - 1)))[:, None]
    r2 = np.sum(y * y, axis=1)
    u = (n[None, :] + y @ E.T) / np.sqrt(1 + r2)[:, None]
    proj = u @ F.T
    w = proj.max(axis=1) - proj.min(axis=1)
    ball = math.pi ** ((d - 1) / 2) / math.gamma((d + 1) / 2) * t ** (d - 1)
    sphere = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
    vals = np.maximum(0.0, 2 * eps - w) * (1 + r2) ** (-d / 2) * _weight(dist, u) * ball / sphere * 2
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(draws))


def facet_class_measure(spec: TargetSpec, j, dist: DirectionalDistribution,
                        intensity: ProcessIntensity, rel_tol=1e-10, mc_seed=0) -> Estimate:
    """``Theta(A_j)``.

    The integrand is supported on two small caps around the facet normal.
    Those caps are parametrised through the tangent plane at ``+-n_j`` and
    integrated with Gauss rules split at the kinks of the width (d = 2, 3),
    by Monte Carlo over the tangent ball (d >= 4), or summed exactly for
    atomic ``phi``.
    """
    F = spec.facet_vertices[j]
    n = spec.facet_normals[j]
    eps = spec.eps
    g = intensity.gamma
    d = spec.dimension

    def integrand(u):
        proj = np.atleast_2d(u) @ F.T
        return np.maximum(0.0, 2 * eps - (proj.max(axis=1) - proj.min(axis=1)))

    if isinstance(dist, AtomicDistribution):
        est = dist.integrate(integrand)
        return Estimate(float(g * est.value), 0.0, "exact", True)
    facet_in_plane = (F - F[0]) @ _tangent_basis(n)
    s = 2 * eps / min_width(facet_in_plane)
    if s >= 1:
        est = dist.integrate(integrand, rel_tol=rel_tol, mc_seed=mc_seed)
        return Estimate(g * est.value, g * est.error, est.method, est.converged)
    if d == 2:
        a, b = _facet_integral_2d(F, n, eps, dist, 32), _facet_integral_2d(F, n, eps, dist, 64)
    elif d == 3:
        a, b = _facet_integral_3d(F, n, eps, dist, 24), _facet_integral_3d(F, n, eps, dist, 48)
    else:
        t = s / math.sqrt(1 - s * s)
        val, se = _facet_integral_mc(F, n, eps, dist, t, mc_seed)
        return Estimate(g * val, g * se, "monte-carlo", True)
    err = abs(a - b)
    return Estimate(float(g * b), float(g * err), "quadrature",
                    bool(err <= rel_tol * abs(b) or err < 1e-15))


def _normal_angles(spec):
    if spec.dimension != 2:
        return None
    N = spec.facet_normals
    ang = np.arctan2(N[:, 1], N[:, 0])
    return list(ang) + list(ang + math.pi)


def event_probability(spec: TargetSpec, dist: DirectionalDistribution,
                      intensity: ProcessIntensity, rel_tol=1e-6) -> EventProbability:
    """``P(E) = prod_j Theta(A_j) exp(-Theta(A_j)) * exp(-Theta(C))``.

    The product form needs the classes to be pairwise disjoint, so a granted
    certificate is required.  ``rel_tol`` bounds the quadrature error of each
    factor; the error of ``Theta(C)`` is also the relative error of ``P(E)``.
    """
    if not spec.certified:
        raise CertificationRequired(
            "event probability needs a granted certificate (pairwise disjoint classes)")
    if dist.dimension != spec.dimension:
        raise ValueError("distribution and target dimensions differ")
    theta = tuple(facet_class_measure(spec, j, dist, intensity, rel_tol, mc_seed=j)
                  for j in range(spec.m))
    h = polytope_support(spec.vertices)
    hit = hitting_mean(dist, intensity, lambda u: h(u) + 1.0, rel_tol=rel_tol,
                       breaks=_normal_angles(spec))
    sa = sum(e.value for e in theta)
    theta_c = Estimate(hit.value - sa, hit.error + sum(e.error for e in theta),
                       hit.method, hit.converged)
    log_p = sum(math.log(e.value) - e.value if e.value > 0 else -math.inf for e in theta) - theta_c.value
    p = math.exp(log_p)
    # first-order propagation of the component errors
    rel = sum(abs(1 / e.value - 1) * e.error if e.value > 0 else 0.0 for e in theta) + theta_c.error
    conv = hit.converged and all(e.converged for e in theta)
    return EventProbability(float(p), float(p * rel), theta, theta_c, hit, bool(conv))


# ---------------------------------------------------------------------------
# certification

@dataclass
class Certificate:
    """Outcome of certifying ``(eps, D)`` for a target.

    ``pair_widths`` lists ``[j, k, w]`` with ``w`` the minimal width of
    ``vert F_j`` union ``vert F_k``; ``A_j`` and ``A_k`` are disjoint iff
    ``w > 2 eps``.  The randomized part records the worst observed margins.
    """

    granted: bool
    eps: float
    D: float
    fingerprint: str
    draws: int
    seed: int
    disjoint: bool
    pair_widths: list = field(default_factory=list)
    failing_pair: list | None = None
    counterexample: dict | None = None
    worst: dict = field(default_factory=dict)
    reason: str = ""

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def draw_class_hyperplane(spec: TargetSpec, j, rng, max_tries=10_000):
    """A random hyperplane ``(u, tau)`` in ``A_j``, covering the whole class.

    The normal is drawn uniformly from the tangent-plane disc that contains
    all admissible normals near ``n_j``; the offset is uniform on its
    admissible interval, or one of its endpoints with probability 1/2.
    """
    F = spec.facet_vertices[j]
    n = spec.facet_normals[j]
    d = spec.dimension
    E = _tangent_basis(n)
    eps = spec.eps
    s = min(2 * eps / min_width((F - F[0]) @ E), 0.999)
    t = s / math.sqrt(1 - s * s)
    for _ in range(max_tries):
        g = rng.standard_normal(d - 1)
        g *= t * rng.random() ** (1.0 / (d - 1)) / np.linalg.norm(g)
        u = n + E @ g
        u /= np.linalg.norm(u)
        proj = F @ u
        # endpoints pulled in by a rounding margin so the draw stays in the closed class
        pad = 1e-12 * (1.0 + np.max(np.abs(proj)))
        lo, hi = proj.max() - eps + pad, proj.min() + eps - pad
        if lo > hi:
            continue
        mode = rng.integers(4)
        tau = lo if mode == 0 else hi if mode == 1 else rng.uniform(lo, hi)
        return u, float(tau)
    raise RuntimeError("could not draw a hyperplane in A_j")


def event_polytope(hyperplanes, d):
    """Intersection of the halfspaces bounded by ``hyperplanes`` that contain the origin."""
    A, b = [], []
    for u, t in hyperplanes:
        if abs(t) < 1e-12:
            raise PolytopeError("event hyperplane passes through the origin")
        s = 1.0 if t > 0 else -1.0
        A.append(s * np.asarray(u, dtype=float))
        b.append(s * t)
    return polytope_from_halfspaces(np.array(A).reshape(-1, d), np.array(b), np.zeros(d))


def bullet_checks(Q: CellPolytope, spec: TargetSpec):
    """The four closeness properties as ``{name: (passed, value)}``."""
    iso = Q.n_facets == spec.m and canonical_type(Q) == spec.fingerprint
    far = max(distance_to_polytope(q, spec.vertices) for q in Q.vertices)
    diam = diameter(Q.vertices)
    cnorm = float(np.linalg.norm(circumcenter(Q.vertices).center))
    return {
        "isomorphic": (bool(iso), Q.n_facets),
        "inside_P_plus_B": (far <= 1 + _BULLET_TOL, far),
        "diameter": (diam <= spec.D + _BULLET_TOL, diam),
        "center_in_B": (cnorm <= 1 + _BULLET_TOL, cnorm),
    }


def certify_epsilon0(P, eps, D, draws=DEFAULT_DRAWS, seed=0) -> Certificate:
    """Certify that ``eps`` and ``D`` make the closeness construction work for ``P``.

    Step one decides disjointness of every pair ``A_j``, ``A_k`` exactly.
    Step two draws ``draws`` tuples ``H_j in A_j`` and checks the four
    properties of the polytope they bound.  The first failure refuses.
    """
    spec = P if isinstance(P, TargetSpec) else TargetSpec(P, eps, D)
    if spec.eps != eps or spec.D != D:
        spec = TargetSpec(spec.polytope, eps, D, spec.name)
    cert = Certificate(False, float(eps), float(D), spec.fingerprint.hex, int(draws),
                       int(seed), False)
    F = spec.facet_vertices
    for j, k in itertools.combinations(range(spec.m), 2):
        w = min_width(np.vstack([F[j], F[k]]))
        cert.pair_widths.append([j, k, w])
        if w <= 2 * eps and cert.failing_pair is None:
            cert.failing_pair = [j, k]
    if cert.failing_pair is not None:
        j, k = cert.failing_pair
        cert.reason = (f"classes A_{j} and A_{k} overlap: a hyperplane is within eps of "
                       f"every vertex of both facets")
        return cert
    cert.disjoint = True

    rng = make_rng(seed, 0)
    worst = {"inside_P_plus_B": 0.0, "diameter": 0.0, "center_in_B": 0.0}
    for i in range(draws):
        hs = [draw_class_hyperplane(spec, j, rng) for j in range(spec.m)]
        record = {"draw": i, "hyperplanes": [[u.tolist(), t] for u, t in hs]}
        try:
            Q = event_polytope(hs, spec.dimension)
        except (PolytopeError, ValueError) as exc:
            cert.counterexample = {**record, "error": str(exc)}
            cert.reason = f"draw {i}: hyperplanes do not bound a polytope ({exc})"
            return cert
        checks = bullet_checks(Q, spec)
        for name in worst:
            worst[name] = max(worst[name], float(checks[name][1]))
        failed = [name for name, (ok, _) in checks.items() if not ok]
        if failed:
            cert.counterexample = {**record, "failed": failed,
                                   "values": {k: v for k, (_, v) in checks.items()}}
            cert.reason = f"draw {i}: {', '.join(failed)} failed"
            cert.worst = worst
            return cert
    cert.worst = worst
    cert.granted = True
    cert.reason = "granted"
    return cert


# ---------------------------------------------------------------------------
# checking occurrences of the event

@dataclass
class BulletReport:
    checks: dict
    event_ids: tuple
    cell: CellPolytope | None = None

    @property
    def passed(self):
        return all(ok for ok, _ in self.checks.values())


def verify_bullet_on_event(sample: ProcessSample, spec: TargetSpec) -> BulletReport:
    """Check that the tessellation cell at the origin is close to ``P``.

    Raises :class:`BulletViolation` if any check fails.
    """
    out = classify_event(sample, spec)
    if not out.occurred:
        raise ValueError("the event did not occur in this sample")
    ids = tuple(x[0] for x in out.a_ids)
    d = spec.dimension
    o = np.zeros(d)
    rows = {int(i): k for k, i in enumerate(sample.ids)}
    hs = [(sample.normals[rows[i]], float(sample.offsets[rows[i]])) for i in ids]
    Q = event_polytope(hs, d)
    cells = [c for c in extract_cells(sample) if c.contains(o)[0]]
    checks = {"located": (len(cells) == 1 and not cells[0].touches_window, len(cells))}
    cell = cells[0] if cells else None
    if cell is not None:
        checks["sources"] = (set(cell.sources) == set(ids), sorted(cell.sources))
        gap = max(distance_to_polytope(v, Q.vertices) for v in cell.vertices)
        checks["matches_event_polytope"] = (gap <= 1e-7 and cell.n_vertices == Q.n_vertices, gap)
        checks.update(bullet_checks(cell, spec))
    report = BulletReport(checks, ids, cell)
    if not report.passed:
        raise BulletViolation(report)
    return report


def event_realization(spec: TargetSpec, dist: DirectionalDistribution,
                      intensity: ProcessIntensity, seed, stream=0, batch=20_000):
    """A realisation conditioned on the event.

    Hyperplanes missing ``P + B`` are simulated as usual; each class
    ``A_j`` receives one hyperplane from the intensity measure restricted to
    it (by rejection), and ``C`` none.
    """
    R = spec.circumradius + 1.0 + spec.eps
    base = sample_process(dist, intensity, R, seed, stream)
    A, C = class_membership(base.normals, base.offsets, spec)
    hit = _hits_enlarged(base.normals, base.offsets, spec.vertices)
    keep = ~hit
    U, T = [base.normals[keep]], [base.offsets[keep]]
    rng = make_rng(seed, stream + (1 << 32))
    lim = spec.circumradius + 1.0
    for j in range(spec.m):
        for _ in range(1000):
            u = dist.sample(rng, batch)
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            t = rng.uniform(-lim, lim, size=batch)
            Aj, _ = class_membership(u, t, spec)
            good = np.nonzero(Aj[:, j])[0]
            if len(good):
                U.append(u[good[:1]])
                T.append(t[good[:1]])
                break
        else:
            raise RuntimeError(f"class A_{j} has no mass under this distribution")
    U, T = np.vstack(U), np.concatenate(T)
    for i in range(len(T)):
        nz = np.nonzero(U[i])[0]
        if len(nz) and U[i, nz[0]] < 0:
            U[i], T[i] = -U[i], -T[i]
    return ProcessSample(spec.dimension, R, U, T, np.arange(len(T)), int(seed), int(stream),
                         dist.tag, intensity.gamma)
