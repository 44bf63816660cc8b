"""Combinatorial types of polytopes.

Two polytopes have the same type when their facet-vertex incidences are
isomorphic.  The type is decided by a canonical form of the bipartite
incidence graph, computed by colour refinement plus individualisation with
automorphism pruning.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "TypeFingerprint",
    "is_simple",
    "canonical_type",
    "f_vector",
    "type_catalog_lookup",
    "catalog",
    "build_catalog",
    "reference_polytope",
]


@dataclass(frozen=True, eq=False)
class TypeFingerprint:
    """Canonical form of a facet-vertex incidence structure.

    Equality compares the full canonical encoding; :attr:`hex` is a short
    digest used in tables.
    """

    dimension: int
    canonical: bytes
    n_facets: int
    n_vertices: int
    _incidence: tuple = field(default=(), repr=False)

    def __eq__(self, other):
        return (isinstance(other, TypeFingerprint) and self.dimension == other.dimension
                and self.canonical == other.canonical)

    def __hash__(self):
        return hash((self.dimension, self.canonical))

    @property
    def hex(self):
        return hashlib.blake2b(self.canonical, digest_size=12).hexdigest()

    @property
    def f_vector(self):
        return f_vector(self._incidence, self.n_vertices, self.dimension)

    @property
    def summary(self):
        return {"d": self.dimension, "facets": self.n_facets,
                "vertices": self.n_vertices, "f_vector": list(self.f_vector)}

    @property
    def name(self):
        return type_catalog_lookup(self)

    def __repr__(self):
        label = self.name or self.hex
        return f"TypeFingerprint({label}, d={self.dimension}, m={self.n_facets}, v={self.n_vertices})"


def _incidence_of(cell):
    if hasattr(cell, "incidence"):
        return cell.incidence, cell.n_vertices, cell.dimension
    incidence, n_vertices, d = cell
    return tuple(tuple(f) for f in incidence), n_vertices, d


def is_simple(cell, d=None):
    """True iff every vertex lies on exactly ``d`` facets."""
    incidence, nv, dim = _incidence_of(cell)
    d = dim if d is None else d
    counts = np.zeros(nv, dtype=int)
    for f in incidence:
        counts[list(f)] += 1
    return bool(np.all(counts == d))


def f_vector(incidence, n_vertices, d):
    """Face numbers ``(f_0, ..., f_{d-1})`` from the facet-vertex incidence."""
    facets = [frozenset(f) for f in incidence]
    faces = set(facets)
    frontier = set(facets)
    while frontier:
        new = set()
        for f in frontier:
            for g in facets:
                h = f & g
                if h and h not in faces:
                    new.add(h)
        faces |= new
        frontier = new
    for v in range(n_vertices):
        faces.add(frozenset([v]))
    dim = {}
    for face in sorted(faces, key=len):
        below = [dim[g] for g in dim if len(g) < len(face) and g < face]
        dim[face] = 1 + max(below) if below else 0
    counts = [0] * d
    for k in dim.values():
        if k < d:
            counts[k] += 1
    return tuple(counts)


# ---------------------------------------------------------------------------
# canonical labelling

def _refine(colors, adj):
    """Colour refinement to the coarsest equitable partition.

    New colours are ranks of ``(old colour, sorted neighbour colours)``,
    which depends on nothing but the coloured graph, so the result is
    canonical.
    """
    n_classes = len(set(colors))
    while True:
        sig = [(colors[i], tuple(sorted(colors[j] for j in adj[i]))) for i in range(len(adj))]
        order = {s: r for r, s in enumerate(sorted(set(sig)))}
        new = [order[s] for s in sig]
        k = len(order)
        colors = new
        if k == n_classes:
            return colors
        n_classes = k


def _individualize(colors, x):
    keys = [(c, 0 if i == x else 1) for i, c in enumerate(colors)]
    order = {s: r for r, s in enumerate(sorted(set(keys)))}
    return [order[k] for k in keys]


def _target_cell(colors):
    classes = {}
    for i, c in enumerate(colors):
        classes.setdefault(c, []).append(i)
    cells = [(len(v), c, v) for c, v in classes.items() if len(v) > 1]
    if not cells:
        return None
    return min(cells)[2]


class _Orbits:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _canonical_form(n_facets, n_vertices, incidence):
    n = n_facets + n_vertices
    adj = [[] for _ in range(n)]
    edges = []
    for j, f in enumerate(incidence):
        for v in f:
            adj[j].append(n_facets + v)
            adj[n_facets + v].append(j)
            edges.append((j, n_facets + v))

    def certificate(colors):
        return tuple(sorted((colors[a], colors[b]) for a, b in edges))

    best = {"cert": None, "labels": None}
    automorphisms = []

    def leaf(colors):
        cert = certificate(colors)
        if best["cert"] is None or cert < best["cert"]:
            best["cert"], best["labels"] = cert, colors
        elif cert == best["cert"]:
            inv = {c: i for i, c in enumerate(best["labels"])}
            automorphisms.append([inv[c] for c in colors])

    def search(colors, prefix):
        colors = _refine(colors, adj)
        cell = _target_cell(colors)
        if cell is None:
            leaf(colors)
            return
        explored = []
        for x in cell:
            # automorphisms fixing the prefix map branches onto equivalent ones
            orbits = _Orbits(n)
            for g in automorphisms:
                if all(g[p] == p for p in prefix):
                    for a in cell:
                        orbits.union(a, g[a])
            if any(orbits.find(x) == orbits.find(y) for y in explored):
                continue
            explored.append(x)
            search(_individualize(colors, x), prefix + [x])

    search([0] * n_facets + [1] * n_vertices, [])
    return best["cert"]


def canonical_type(cell) -> TypeFingerprint:
    """Fingerprint of the combinatorial type of ``cell``.

    ``cell`` is a :class:`~phtess.geometry.CellPolytope` or a tuple
    ``(incidence, n_vertices, d)``.
    """
    incidence, nv, d = _incidence_of(cell)
    m = len(incidence)
    cert = _canonical_form(m, nv, incidence)
    buf = struct.pack("<HHHI", d, m, nv, len(cert))
    buf += np.asarray(cert, dtype="<u2").tobytes()
    canon_inc = [[] for _ in range(m)]
    for a, b in cert:
        canon_inc[a].append(b - m)
    return TypeFingerprint(d, buf, m, nv, tuple(tuple(f) for f in canon_inc))


# ---------------------------------------------------------------------------
# catalogue of named types

def _regular_polygon(k, radius=1.0, phase=0.0):
    t = phase + 2 * np.pi * np.arange(k) / k
    return np.column_stack([radius * np.cos(t), radius * np.sin(t)])


def reference_polytope(name):
    """Construct a named reference polytope.

    Names: ``"k-gon"``, ``"simplex-d"``, ``"cube-d"``, ``"prism-k"``, plus
    the aliases ``"square"``, ``"triangle"``, ``"cube"``.
    """
    from .geometry import polytope_from_vertices

    aliases = {"square": "4-gon", "triangle": "3-gon", "cube": "cube-3"}
    name = aliases.get(name, name)
    if name.endswith("-gon"):
        pts = _regular_polygon(int(name[:-4]))
    elif name.startswith("simplex-"):
        d = int(name.split("-")[1])
        pts = np.vstack([np.zeros(d), np.eye(d)])
    elif name.startswith("cube-"):
        d = int(name.split("-")[1])
        pts = np.array(np.meshgrid(*[[-1.0, 1.0]] * d, indexing="ij")).reshape(d, -1).T
    elif name.startswith("prism-"):
        k = int(name.split("-")[1])
        base = _regular_polygon(k)
        pts = np.vstack([np.column_stack([base, -np.ones(k)]),
                         np.column_stack([base, np.ones(k)])])
    else:
        raise KeyError(f"unknown reference polytope {name!r}")
    return polytope_from_vertices(pts)


CATALOG_NAMES = (
    [f"{k}-gon" for k in range(3, 13)]
    + [f"simplex-{d}" for d in (3, 4, 5)]
    + ["cube-3", "cube-4"]
    + [f"prism-{k}" for k in (3, 5, 6, 7, 8)]
)


def build_catalog():
    rows = []
    for name in CATALOG_NAMES:
        fp = canonical_type(reference_polytope(name))
        rows.append({"name": name, "d": fp.dimension, "facets": fp.n_facets,
                     "vertices": fp.n_vertices, "digest": fp.hex,
                     "canonical": fp.canonical.hex()})
    return rows


def write_catalog(path):
    Path(path).write_text(json.dumps(build_catalog(), indent=1) + "\n")


_CATALOG = None


def catalog():
    """``{(d, canonical bytes): name}`` for the shipped named types."""
    global _CATALOG
    if _CATALOG is None:
        text = resources.files("phtess").joinpath("data/catalog.json").read_text()
        _CATALOG = {(r["d"], bytes.fromhex(r["canonical"])): r["name"] for r in json.loads(text)}
    return _CATALOG


def type_catalog_lookup(fingerprint):
    """Human-readable name of a registered type, else ``None``."""
    return catalog().get((fingerprint.dimension, fingerprint.canonical))


if __name__ == "__main__":
    import sys

    target = sys.argv[1] if len(sys.argv) > 1 else str(Path(__file__).parent / "data" / "catalog.json")
    write_catalog(target)
    print(f"wrote {len(CATALOG_NAMES)} types to {target}")
