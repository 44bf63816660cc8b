"""Domain types for stationary Poisson hyperplane processes.

A process is fixed by an intensity ``gamma`` and a directional distribution
``phi`` (an even probability measure on the unit sphere).  Hyperplanes are
written as ``H(u, tau) = {x : <x, u> = tau}`` and the intensity measure of a
set ``A`` of hyperplanes is::

    Theta(A) = gamma * int_S int_R 1_A(H(u, tau)) dtau phi(du)

With this normalisation the expected number of hyperplanes hitting a convex
body ``K`` is ``gamma * int (h_K(u) + h_K(-u)) phi(du) = 2 gamma int h_K dphi``,
so a ball of radius ``R`` is hit ``2 gamma R`` times on average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .constants import NORMAL_TOL

__all__ = [
    "Hyperplane",
    "ProcessIntensity",
    "Estimate",
    "DirectionalDistribution",
    "IsotropicDistribution",
    "AtomicDistribution",
    "DensityDistribution",
    "watson",
    "distribution_from_spec",
    "canonical_normal_sign",
    "sample_direction",
    "hitting_mean",
    "polytope_support",
    "ball_support",
]


def canonical_normal_sign(u):
    """Return +1 or -1 so that ``sign * u`` has its first nonzero coordinate positive."""
    for x in u:
        if x > 0:
            return 1
        if x < 0:
            return -1
    return 1


@dataclass(frozen=True)
class Hyperplane:
    """The hyperplane ``{x : <x, normal> = offset}``.

    ``(u, tau)`` and ``(-u, -tau)`` name the same hyperplane; the stored
    representative is the one whose normal has a positive leading coordinate.
    """

    normal: tuple
    offset: float
    id: int = 0

    def __post_init__(self):
        u = np.asarray(self.normal, dtype=float)
        if u.ndim != 1 or u.size < 2:
            raise ValueError("normal must be a vector of dimension >= 2")
        norm = float(np.linalg.norm(u))
        if abs(norm - 1.0) > NORMAL_TOL:
            raise ValueError(f"normal must be a unit vector, got norm {norm!r}")
        s = canonical_normal_sign(u)
        object.__setattr__(self, "normal", tuple(float(x) for x in s * u))
        object.__setattr__(self, "offset", float(s * self.offset))

    @classmethod
    def through(cls, normal, offset, id=0):
        """Build from a not necessarily normalised normal vector."""
        u = np.asarray(normal, dtype=float)
        n = np.linalg.norm(u)
        return cls(tuple(u / n), float(offset) / n, id)

    @property
    def dimension(self):
        return len(self.normal)

    def signed_distance(self, x):
        return np.asarray(x, dtype=float) @ np.asarray(self.normal) - self.offset


@dataclass(frozen=True)
class ProcessIntensity:
    gamma: float

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValueError(f"intensity must be positive, got {self.gamma!r}")


@dataclass(frozen=True)
class Estimate:
    """A numerical value with an error bound.

    ``method`` is ``"exact"``, ``"quadrature"`` or ``"monte-carlo"``.  For
    quadrature the error is the difference between two successive
    refinements; for Monte Carlo it is one standard error.
    """

    value: float
    error: float
    method: str
    converged: bool = True

    def __float__(self):
        return float(self.value)


# ---------------------------------------------------------------------------
# sphere quadrature

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _composite_gauss(a, b, panels):
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return x, w


def _circle_rule(panels, breaks=None):
    if not breaks:
        theta, w = _composite_gauss(0.0, 2.0 * math.pi, panels)
    else:
        b = np.unique(np.mod(np.asarray(breaks, dtype=float), 2.0 * math.pi))
        b = np.append(b, b[0] + 2.0 * math.pi)
        per = max(1, panels // len(b))
        parts = [_composite_gauss(lo, hi, per) for lo, hi in zip(b[:-1], b[1:]) if hi > lo]
        theta = np.concatenate([p[0] for p in parts])
        w = np.concatenate([p[1] for p in parts])
    u = np.column_stack([np.cos(theta), np.sin(theta)])
    return u, w / (2.0 * math.pi)


def _sphere_rule(panels):
    z, wz = _composite_gauss(-1.0, 1.0, panels)
    phi, wp = _composite_gauss(0.0, 2.0 * math.pi, 2 * panels)
    zz, pp = np.meshgrid(z, phi, indexing="ij")
    r = np.sqrt(np.clip(1.0 - zz**2, 0.0, None))
    u = np.column_stack([(r * np.cos(pp)).ravel(), (r * np.sin(pp)).ravel(), zz.ravel()])
    w = np.outer(wz, wp).ravel() / (4.0 * math.pi)
    return u, w


_QUAD_START = {2: 64, 3: 16}
_QUAD_MAX = {2: 1 << 14, 3: 256}
_MC_DRAWS = 200_000


class DirectionalDistribution:
    """Even probability measure on the unit sphere of ``R^d``.

    Subclasses provide :meth:`sample` and :meth:`_weight` (the density with
    respect to the uniform probability measure, used by quadrature).
    """

    kind = "abstract"

    def __init__(self, dimension):
        if int(dimension) != dimension or dimension < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {dimension!r}")
        self.dimension = int(dimension)
        self.supports_full_sphere = False
        self.vanishes_on_great_subspheres = False

    @property
    def satisfies_hypotheses(self):
        """Both conditions under which every simple type has positive density."""
        return self.supports_full_sphere and self.vanishes_on_great_subspheres

    def sample(self, rng, n):
        raise NotImplementedError

    def _weight(self, u):
        raise NotImplementedError

    def to_spec(self):
        raise NotImplementedError

    @property
    def tag(self):
        return self.kind

    def integrate(self, f, rel_tol=1e-10, mc_seed=0, breaks=None):
        """Integrate ``f`` (vectorised over rows of an ``(n, d)`` array) against phi.

        In the plane ``breaks`` lists angles where ``f`` has kinks; panels are
        aligned to them.
        """
        d = self.dimension
        if d in (2, 3):
            rule = (lambda p: _circle_rule(p, breaks)) if d == 2 else _sphere_rule
            panels = _QUAD_START[d]
            prev = None
            while True:
                u, w = rule(panels)
                val = float(np.sum(w * self._weight(u) * f(u)))
                if prev is not None:
                    err = abs(val - prev)
                    if err <= rel_tol * max(1.0, abs(val)):
                        return Estimate(val, err, "quadrature", True)
                    if panels >= _QUAD_MAX[d]:
                        return Estimate(val, err, "quadrature", False)
                prev = val
                panels *= 2
        rng = np.random.Generator(np.random.Philox(key=mc_seed))
        u = self.sample(rng, _MC_DRAWS)
        vals = f(u)
        se = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
        return Estimate(float(np.mean(vals)), se, "monte-carlo", True)

    def __repr__(self):
        return f"{type(self).__name__}(d={self.dimension})"


class IsotropicDistribution(DirectionalDistribution):
    kind = "isotropic"

    def __init__(self, dimension):
        super().__init__(dimension)
        self.supports_full_sphere = True
        self.vanishes_on_great_subspheres = True

    def sample(self, rng, n):
        g = rng.standard_normal((n, self.dimension))
        return g / np.linalg.norm(g, axis=1, keepdims=True)

    def _weight(self, u):
        return 1.0

    def to_spec(self):
        return {"kind": "isotropic"}


class AtomicDistribution(DirectionalDistribution):
    """Finitely many antipodal pairs ``+-a_i`` carrying total mass ``w_i`` each.

    Half of ``w_i`` sits on ``a_i`` and half on ``-a_i``, so the measure is
    even by construction.
    """

    kind = "atomic"

    def __init__(self, atoms):
        atoms = list(atoms)
        if not atoms:
            raise ValueError("atomic distribution needs at least one atom")
        dirs = []
        weights = []
        for direction, weight in atoms:
            a = np.asarray(direction, dtype=float)
            n = np.linalg.norm(a)
            if n == 0 or weight <= 0:
                raise ValueError("atoms need nonzero directions and positive weights")
            a = a / n
            a = a * canonical_normal_sign(a)
            for i, b in enumerate(dirs):
                if np.allclose(a, b, atol=1e-14):
                    weights[i] += float(weight)
                    break
            else:
                dirs.append(a)
                weights.append(float(weight))
        super().__init__(len(dirs[0]))
        if any(len(a) != self.dimension for a in dirs):
            raise ValueError("all atoms must have the same dimension")
        self.directions = np.array(dirs)
        self.weights = np.array(weights) / sum(weights)
        # every point of the sphere lies on some great subsphere
        self.supports_full_sphere = False
        self.vanishes_on_great_subspheres = False

    def sample(self, rng, n):
        idx = rng.choice(len(self.weights), size=n, p=self.weights)
        sign = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        return self.directions[idx] * sign[:, None]

    def integrate(self, f, rel_tol=1e-10, mc_seed=0, breaks=None):
        val = 0.5 * (self.weights @ f(self.directions) + self.weights @ f(-self.directions))
        return Estimate(float(val), 0.0, "exact", True)

    def mass(self, directions):
        """Mass assigned to a finite set of points of the sphere."""
        total = 0.0
        for v in np.atleast_2d(np.asarray(directions, dtype=float)):
            v = v / np.linalg.norm(v)
            for a, w in zip(self.directions, self.weights):
                if np.allclose(v, a, atol=1e-12) or np.allclose(v, -a, atol=1e-12):
                    total += 0.5 * w
        return total

    def to_spec(self):
        return {
            "kind": "atomic",
            "atoms": [[a.tolist(), float(w)] for a, w in zip(self.directions, self.weights)],
        }


class DensityDistribution(DirectionalDistribution):
    """Absolutely continuous distribution with an even density.

    ``pdf`` is the density with respect to the uniform probability measure on
    the sphere and ``sampler(rng, n)`` draws ``n`` directions from it.
    """

    kind = "density"

    def __init__(self, dimension, pdf: Callable, sampler: Callable, name="custom", params=None):
        super().__init__(dimension)
        self.pdf = pdf
        self.sampler = sampler
        self.name = name
        self.params = dict(params or {})
        probe = IsotropicDistribution(dimension).sample(
            np.random.Generator(np.random.Philox(key=12345)), 512)
        p, q = pdf(probe), pdf(-probe)
        if not np.allclose(p, q, rtol=1e-9, atol=1e-12):
            raise ValueError("density must be even: pdf(u) == pdf(-u)")
        if np.any(p < 0):
            raise ValueError("density must be nonnegative")
        mass = IsotropicDistribution(dimension).integrate(pdf, rel_tol=1e-8)
        if abs(mass.value - 1.0) > 1e-4 + 10 * mass.error:
            raise ValueError(f"density must integrate to 1, got {mass.value:.6g}")
        grid = (_circle_rule(64)[0] if dimension == 2 else
                _sphere_rule(16)[0] if dimension == 3 else probe)
        self.supports_full_sphere = bool(np.all(pdf(grid) > 0))
        # absolutely continuous measures give zero mass to null sets
        self.vanishes_on_great_subspheres = True

    def sample(self, rng, n):
        return np.asarray(self.sampler(rng, n), dtype=float)

    def _weight(self, u):
        return self.pdf(u)

    @property
    def tag(self):
        return f"density:{self.name}"

    def to_spec(self):
        return {"kind": "density", "name": self.name, "params": self.params}


def watson(dimension, mu=None, kappa=1.0):
    """Watson distribution, density proportional to ``exp(kappa <mu, u>^2)``.

    Positive ``kappa`` concentrates mass around ``+-mu``, negative ``kappa``
    around the great subsphere orthogonal to ``mu``.  Either way the support
    is the whole sphere.
    """
    d = int(dimension)
    mu = np.eye(d)[0] if mu is None else np.asarray(mu, dtype=float)
    mu = mu / np.linalg.norm(mu)
    kappa = float(kappa)
    norm = special.hyp1f1(0.5, 0.5 * d, kappa)
    peak = max(kappa, 0.0)

    def pdf(u):
        t = np.asarray(u) @ mu
        return np.exp(kappa * t * t) / norm

    def sampler(rng, n):
        out = np.empty((n, d))
        filled = 0
        while filled < n:
            m = max(2 * (n - filled), 64)
            g = rng.standard_normal((m, d))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            t = g @ mu
            keep = g[rng.random(m) < np.exp(kappa * t * t - peak)]
            take = min(len(keep), n - filled)
            out[filled:filled + take] = keep[:take]
            filled += take
        return out

    return DensityDistribution(d, pdf, sampler, name="watson",
                               params={"mu": mu.tolist(), "kappa": kappa})


_DENSITIES = {"watson": watson}


def distribution_from_spec(spec, dimension):
    """Build a distribution from its config form.

    ``{"kind": "isotropic"}``, ``{"kind": "atomic", "atoms": [[dir, w], ...]}``
    or ``{"kind": "density", "name": "watson", "params": {...}}``.
    """
    kind = spec.get("kind")
    if kind == "isotropic":
        return IsotropicDistribution(dimension)
    if kind == "atomic":
        dist = AtomicDistribution([(a, w) for a, w in spec["atoms"]])
        if dist.dimension != dimension:
            raise ValueError(f"atoms have dimension {dist.dimension}, expected {dimension}")
        return dist
    if kind == "density":
        name = spec.get("name")
        if name not in _DENSITIES:
            raise ValueError(f"unknown density {name!r}; known: {sorted(_DENSITIES)}")
        return _DENSITIES[name](dimension, **spec.get("params", {}))
    raise ValueError(f"unknown distribution kind {kind!r}")


def sample_direction(dist: DirectionalDistribution, rng) -> np.ndarray:
    """Draw one unit vector from ``dist``."""
    u = dist.sample(rng, 1)[0]
    return u / np.linalg.norm(u)


def polytope_support(vertices):
    """Support function ``h(u) = max_v <v, u>`` of the hull of ``vertices``."""
    V = np.asarray(vertices, dtype=float)

    def h(u):
        return np.max(np.atleast_2d(u) @ V.T, axis=1)

    return h


def ball_support(radius, center=None):
    def h(u):
        u = np.atleast_2d(u)
        base = np.zeros(len(u)) if center is None else u @ np.asarray(center, dtype=float)
        return base + radius * np.linalg.norm(u, axis=1)

    return h


def hitting_mean(dist: DirectionalDistribution, intensity: ProcessIntensity,
                 support: Callable, rel_tol=1e-10, breaks=None) -> Estimate:
    """Expected number of process hyperplanes meeting the convex body ``K``.

    ``support`` evaluates the support function ``h_K`` on rows of an array of
    unit vectors.  The integrand is the width ``h_K(u) + h_K(-u)``, so ``K``
    need not contain the origin.  For polygons pass the facet normal angles
    as ``breaks``.
    """
    est = dist.integrate(lambda u: support(u) + support(-u), rel_tol=rel_tol, breaks=breaks)
    g = intensity.gamma
    return Estimate(g * est.value, g * est.error, est.method, est.converged)
