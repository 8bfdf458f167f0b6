"""Quasi-uniform center sets and their fill/separation geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ._kernels import backend
from .errors import DegeneracyError, ParameterError, SizeError
from .field import DEFAULT_NODES, Domain, QuadratureRule, midpoint_rule
from .io import _write_text, fmt

__all__ = [
    "CenterSet",
    "make_center_set",
    "farthest_point_order",
    "farthest_point_sample",
    "grid_centers",
    "grid_shape",
    "fill_distance",
    "separation_radius",
    "MIN_PROBE_NODES",
    "default_probe",
]

MIN_PROBE_NODES = 32
# default probes resolve at least this many nodes per center spacing
PROBE_NODES_PER_SPACING = 8


def default_probe(domain: Domain, K: int) -> QuadratureRule:
    """Midpoint probe fine enough that its cell diagonal is small next to ``K^(-1/d)``."""
    per_axis = PROBE_NODES_PER_SPACING * math.ceil(K ** (1.0 / domain.d) - 1e-9)
    return midpoint_rule(domain, max(DEFAULT_NODES[domain.d], per_axis))


@dataclass(frozen=True)
class CenterSet:
    """K centers with fill distance ``h``, separation radius ``q`` and ``rho = h/q``.

    ``q`` and ``rho`` are NaN when K < 2. ``indices`` records candidate
    positions when the set came from farthest-point sampling.
    """

    domain: Domain
    centers: np.ndarray = field(repr=False)
    h: float
    q: float
    rho: float
    indices: np.ndarray | None = field(default=None, repr=False)

    @property
    def K(self) -> int:
        return self.centers.shape[0]

    def prefix(self, K: int, probe: QuadratureRule | None = None) -> "CenterSet":
        """The first ``K`` centers as their own set (nested-run prefix)."""
        if not 1 <= K <= self.K:
            raise SizeError(f"prefix size {K} outside [1, {self.K}]")
        idx = None if self.indices is None else self.indices[:K]
        return make_center_set(self.domain, self.centers[:K], probe=probe, indices=idx)

    def to_csv(self, path) -> None:
        d = self.domain.d
        lines = [f"# h={fmt(self.h)}", f"# q={fmt(self.q)}", f"# rho={fmt(self.rho)}",
                 ",".join(f"x{i + 1}" for i in range(d))]
        lines += [",".join(fmt(v) for v in c) for c in self.centers]
        _write_text(path, "\n".join(lines) + "\n")


def _fill(centers: np.ndarray, probe: QuadratureRule) -> float:
    dist, _ = cKDTree(centers).query(probe.nodes)
    return float(dist.max())


def _separation(centers: np.ndarray) -> float:
    dist, _ = cKDTree(centers).query(centers, k=2)
    dmin = float(dist[:, 1].min())
    if dmin == 0.0:
        raise DegeneracyError("center set contains duplicate points")
    return 0.5 * dmin


def make_center_set(domain: Domain, centers, probe: QuadratureRule | None = None,
                    indices=None) -> CenterSet:
    centers = np.array(centers, dtype=np.float64, ndmin=2)
    if centers.shape[1] != domain.d:
        raise ParameterError("center dimension does not match the domain")
    if centers.shape[0] < 1:
        raise SizeError("a center set needs at least one center")
    if not np.all(domain.contains(centers, strict=True)):
        raise ParameterError("centers must lie strictly inside the domain")
    probe = probe or default_probe(domain, centers.shape[0])
    h = _fill(centers, probe)
    if centers.shape[0] >= 2:
        q = _separation(centers)
        rho = h / q
    else:
        q = rho = math.nan
    centers.setflags(write=False)
    if indices is not None:
        indices = np.asarray(indices, dtype=np.intp)
        indices.setflags(write=False)
    return CenterSet(domain, centers, h, q, rho, indices)


def farthest_point_order(candidates, K: int, anchor) -> np.ndarray:
    """Indices of a greedy farthest-point run seeded at the candidate nearest ``anchor``."""
    pts = np.ascontiguousarray(candidates, dtype=np.float64)
    if pts.ndim != 2:
        raise ParameterError("candidates must be a (n, d) array")
    if K < 1:
        raise SizeError("K must be at least 1")
    if K > pts.shape[0]:
        raise SizeError(f"cannot pick K={K} centers from {pts.shape[0]} candidates")
    anchor = np.ascontiguousarray(anchor, dtype=np.float64).reshape(pts.shape[1])
    return np.asarray(backend.farthest_point_indices(pts, int(K), anchor))


def farthest_point_sample(candidates, K: int, domain: Domain | None = None,
                          start_rule: str = "centroid",
                          probe: QuadratureRule | None = None) -> CenterSet:
    """Nested farthest-point sampling.

    The first center is the candidate nearest the domain centroid; later picks
    maximise the distance to the chosen set. Both ties go to the lowest index.
    """
    pts = np.asarray(candidates, dtype=np.float64)
    if domain is None:
        domain = Domain.unit(pts.shape[1])
    if start_rule != "centroid":
        raise ParameterError(f"unknown start rule {start_rule!r}")
    idx = farthest_point_order(pts, K, domain.centroid)
    return make_center_set(domain, pts[idx], probe=probe, indices=idx)


def grid_shape(K: int, d: int) -> tuple[int, ...]:
    """Near-square lattice shape with at least K cells."""
    if K < 1:
        raise SizeError("K must be at least 1")
    n = int(round(K ** (1.0 / d)))
    while n**d > K:
        n -= 1
    while (n + 1) ** d <= K:
        n += 1
    shape = [n] * d
    axis = 0
    while math.prod(shape) < K:
        shape[axis] += 1
        axis = (axis + 1) % d
    return tuple(shape)


def grid_centers(domain: Domain, K: int, probe: QuadratureRule | None = None) -> CenterSet:
    """Cell centers of a near-square lattice, x1 varying fastest, truncated to K."""
    shape = grid_shape(K, domain.d)
    axes = [lo + (np.arange(n) + 0.5) * (hi - lo) / n
            for lo, hi, n in zip(domain.lower, domain.upper, shape)]
    # reversed meshgrid so that the first coordinate varies fastest
    mesh = np.meshgrid(*axes[::-1], indexing="ij")
    pts = np.stack([m.ravel() for m in mesh[::-1]], axis=1)[:K]
    return make_center_set(domain, pts, probe=probe)


def fill_distance(cs: CenterSet, probe: QuadratureRule | None = None) -> float:
    """Largest probe-node distance to the nearest center."""
    probe = probe or default_probe(cs.domain, cs.K)
    if min(probe.shape) < MIN_PROBE_NODES:
        raise ParameterError(f"probe needs at least {MIN_PROBE_NODES} nodes per axis")
    if cs.K < 1:
        raise SizeError("empty center set")
    return _fill(np.asarray(cs.centers), probe)


def separation_radius(cs: CenterSet) -> float:
    """Half the minimum pairwise center distance."""
    if cs.K < 2:
        raise SizeError("separation radius needs at least two centers")
    return _separation(np.asarray(cs.centers))
