"""Seeded realisations of a stationary Poisson hyperplane process in a ball."""

from __future__ import annotations

import io
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import GENERAL_POSITION_TOL
from .model import DirectionalDistribution, Hyperplane, ProcessIntensity

__all__ = [
    "make_rng",
    "ProcessSample",
    "sample_process",
    "GeneralPositionReport",
    "general_position_report",
    "dump_sample",
    "load_sample",
]

SERIAL_VERSION = 1


def make_rng(seed, stream=0):
    """Counter-based generator keyed by ``(seed, stream)``.

    Each replicate gets its own stream, so results do not depend on which
    worker runs it or in which order.
    """
    key = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream)]).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(eq=False)
class ProcessSample:
    """Hyperplanes of one realisation that meet the ball ``B_R``.

    Normals are stored row-wise in canonical orientation; ``ids[i]`` names row
    ``i``.
    """

    dimension: int
    radius: float
    normals: np.ndarray
    offsets: np.ndarray
    ids: np.ndarray
    seed: int = 0
    stream: int = 0
    dist_tag: str = "custom"
    gamma: float = float("nan")

    def __post_init__(self):
        self.normals = np.asarray(self.normals, dtype=float).reshape(-1, self.dimension)
        self.offsets = np.asarray(self.offsets, dtype=float).reshape(-1)
        self.ids = np.asarray(self.ids, dtype=np.int64).reshape(-1)
        if not (len(self.normals) == len(self.offsets) == len(self.ids)):
            raise ValueError("normals, offsets and ids must have equal length")
        if len(set(self.ids.tolist())) != len(self.ids):
            raise ValueError("hyperplane ids must be unique")

    def __len__(self):
        return len(self.offsets)

    @property
    def hyperplanes(self):
        return [Hyperplane(tuple(u), float(t), int(i))
                for u, t, i in zip(self.normals, self.offsets, self.ids)]

    @classmethod
    def from_hyperplanes(cls, hyperplanes, radius, **kw):
        hyperplanes = list(hyperplanes)
        d = kw.pop("dimension", None) or hyperplanes[0].dimension
        return cls(
            dimension=d,
            radius=float(radius),
            normals=np.array([h.normal for h in hyperplanes]).reshape(-1, d),
            offsets=np.array([h.offset for h in hyperplanes]),
            ids=np.array([h.id for h in hyperplanes], dtype=np.int64),
            **kw,
        )

    def restrict(self, radius):
        """Keep the hyperplanes meeting ``B_radius``."""
        keep = np.abs(self.offsets) <= radius
        return ProcessSample(self.dimension, float(radius), self.normals[keep],
                             self.offsets[keep], self.ids[keep], self.seed,
                             self.stream, self.dist_tag, self.gamma)

    def translated(self, t):
        """The realisation shifted by the vector ``t``."""
        t = np.asarray(t, dtype=float)
        off = self.offsets + self.normals @ t
        return ProcessSample(self.dimension, self.radius, self.normals, off,
                             self.ids, self.seed, self.stream, self.dist_tag, self.gamma)

    def same_as(self, other):
        return (self.dimension == other.dimension and self.radius == other.radius
                and np.array_equal(self.normals, other.normals)
                and np.array_equal(self.offsets, other.offsets)
                and np.array_equal(self.ids, other.ids))


def sample_process(dist: DirectionalDistribution, intensity: ProcessIntensity,
                   radius, seed, stream=0) -> ProcessSample:
    """Simulate the hyperplanes hitting ``B_radius``.

    The count is Poisson with mean ``2 gamma R``; normals are drawn from
    ``dist`` and offsets uniformly from ``[-R, R]``.
    """
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius!r}")
    rng = make_rng(seed, stream)
    n = int(rng.poisson(2.0 * intensity.gamma * radius))
    u = dist.sample(rng, n) if n else np.empty((0, dist.dimension))
    u = u / np.linalg.norm(u, axis=1, keepdims=True) if n else u
    tau = rng.uniform(-radius, radius, size=n)
    # canonical representative: first nonzero coordinate positive
    for i in range(n):
        for x in u[i]:
            if x != 0:
                if x < 0:
                    u[i] = -u[i]
                    tau[i] = -tau[i]
                break
    return ProcessSample(dist.dimension, float(radius), u, tau,
                         np.arange(n, dtype=np.int64), int(seed), int(stream),
                         dist.tag, float(intensity.gamma))


@dataclass
class GeneralPositionReport:
    tol: float
    parallel: list = field(default_factory=list)
    concurrent: list = field(default_factory=list)
    dependent: list = field(default_factory=list)

    @property
    def empty(self):
        return not (self.parallel or self.concurrent or self.dependent)

    def offending_ids(self):
        ids = set()
        for group in itertools.chain(self.parallel, self.concurrent, self.dependent):
            ids.update(group)
        return sorted(ids)

    def summary(self):
        return {"parallel": len(self.parallel), "concurrent": len(self.concurrent),
                "dependent": len(self.dependent)}


def _combinations_array(n, k):
    if n < k:
        return np.empty((0, k), dtype=np.int64)
    return np.array(list(itertools.combinations(range(n), k)), dtype=np.int64)


def general_position_report(sample: ProcessSample, tol=GENERAL_POSITION_TOL,
                            chunk=4096) -> GeneralPositionReport:
    """List the ways in which ``sample`` fails to be in general position.

    * ``parallel``: pairs whose normals are within ``tol`` of parallel, i.e.
      the sine of the angle between them is below ``tol``.
    * ``concurrent``: ``d + 1`` hyperplanes passing within
      ``tol * (1 + |x|)`` of a common point ``x``.
    * ``dependent``: ``d`` normals spanning a parallelotope of volume below
      ``tol``.
    """
    d = sample.dimension
    U, tau, ids = sample.normals, sample.offsets, sample.ids
    n = len(tau)
    rep = GeneralPositionReport(tol)
    if n < 2:
        return rep

    sin = _pairwise_sine(U)
    for i, j in zip(*np.nonzero(np.triu(sin < tol, k=1))):
        rep.parallel.append((int(ids[i]), int(ids[j])))

    if n < d:
        return rep
    combos = _combinations_array(n, d)
    concurrent = set()
    for start in range(0, len(combos), chunk):
        block = combos[start:start + chunk]
        M = U[block]                                   # (b, d, d)
        det = np.abs(np.linalg.det(M))
        for row in block[det < tol]:
            if not _has_parallel(row, sin, tol):
                rep.dependent.append(tuple(int(ids[k]) for k in row))
        ok = det >= tol
        if n == d or not ok.any():
            continue
        good = block[ok]
        X = np.linalg.solve(M[ok], tau[good][..., None])[..., 0]   # (g, d)
        S = np.abs(X @ U.T - tau[None, :])                          # (g, n)
        lim = tol * (1.0 + np.linalg.norm(X, axis=1))
        hit = S <= lim[:, None]
        for r, k in zip(*np.nonzero(hit)):
            if k in good[r]:
                continue
            concurrent.add(tuple(sorted(int(ids[j]) for j in (*good[r], k))))
    rep.concurrent = sorted(concurrent)
    return rep


def _pairwise_sine(U):
    # |a - b| |a + b| / 2 = sin(angle), accurate for nearly parallel a, b
    s = np.where(U @ U.T >= 0, 1.0, -1.0)
    minus = np.linalg.norm(U[:, None, :] - s[..., None] * U[None, :, :], axis=2)
    plus = np.linalg.norm(U[:, None, :] + s[..., None] * U[None, :, :], axis=2)
    return 0.5 * minus * plus


def _has_parallel(row, sin, tol):
    return any(sin[a, b] < tol for a, b in itertools.combinations(row, 2))


# ---------------------------------------------------------------------------
# JSON lines serialisation

def dump_sample(sample: ProcessSample, fp=None):
    """Write ``sample`` as JSON lines: a header, then one hyperplane per line."""
    out = io.StringIO() if fp is None else fp
    header = {
        "version": SERIAL_VERSION,
        "d": sample.dimension,
        "R": sample.radius,
        "gamma": None if math.isnan(sample.gamma) else sample.gamma,
        "seed": sample.seed,
        "stream": sample.stream,
        "dist": sample.dist_tag,
        "count": len(sample),
    }
    out.write(json.dumps(header) + "\n")
    for i, u, t in zip(sample.ids, sample.normals, sample.offsets):
        out.write(json.dumps({"id": int(i), "u": [float(x) for x in u], "tau": float(t)}) + "\n")
    if fp is None:
        return out.getvalue()


def load_sample(fp) -> ProcessSample:
    lines = fp.splitlines() if isinstance(fp, str) else fp.read().splitlines()
    lines = [ln for ln in lines if ln.strip()]
    header = json.loads(lines[0])
    if header.get("version") != SERIAL_VERSION:
        raise ValueError(f"unsupported sample version {header.get('version')!r}")
    rows = [json.loads(ln) for ln in lines[1:]]
    if len(rows) != header["count"]:
        raise ValueError(f"expected {header['count']} hyperplanes, found {len(rows)}")
    d = header["d"]
    gamma = header["gamma"]
    return ProcessSample(
        dimension=d,
        radius=header["R"],
        normals=np.array([r["u"] for r in rows], dtype=float).reshape(-1, d),
        offsets=np.array([r["tau"] for r in rows], dtype=float),
        ids=np.array([r["id"] for r in rows], dtype=np.int64),
        seed=header["seed"],
        stream=header["stream"],
        dist_tag=header["dist"],
        gamma=float("nan") if gamma is None else gamma,
    )
