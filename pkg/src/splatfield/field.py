"""Analytic ground-truth fields, grid sampling, smoothing and error metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .errors import DimensionError, ParameterError, SizeError, UndefinedRatioError
from .rng import TAG_FOURIER, CounterStream, stream_id

__all__ = [
    "Domain",
    "QuadratureRule",
    "midpoint_rule",
    "default_quadrature",
    "AnalyticField",
    "TaylorGreenField",
    "FourierRandomField",
    "LambOseenField",
    "FunctionField",
    "GridField",
    "make_taylor_green",
    "make_fourier_random",
    "make_lamb_oseen",
    "make_constant",
    "sample_grid",
    "smooth_grid",
    "roughness",
    "rel_l2_error",
    "l2_norm_sq",
    "half_lattice",
    "DEFAULT_NODES",
]

# Midpoint nodes per axis for the default quadrature, keyed by dimension.
DEFAULT_NODES = {2: 128, 3: 48}


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box ``[lower, upper]`` in two or three dimensions."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi):
            raise DimensionError("lower and upper corners differ in dimension")
        if len(lo) not in (2, 3):
            raise DimensionError(f"only d=2 or d=3 boxes are supported, got d={len(lo)}")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ParameterError("domain requires lower < upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, d: int = 2) -> "Domain":
        return cls((0.0,) * d, (1.0,) * d)

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def extent(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    @property
    def centroid(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lower) + np.asarray(self.upper))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.extent))

    def contains(self, x, strict: bool = False) -> np.ndarray:
        x = np.atleast_2d(x)
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        if strict:
            return np.all((x > lo) & (x < hi), axis=1)
        return np.all((x >= lo) & (x <= hi), axis=1)

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper)}

    @classmethod
    def from_dict(cls, data: dict) -> "Domain":
        return cls(tuple(data["lower"]), tuple(data["upper"]))


def _cell_centers(domain: Domain, resolution: Sequence[int]) -> list[np.ndarray]:
    return [
        lo + (np.arange(n) + 0.5) * (hi - lo) / n
        for lo, hi, n in zip(domain.lower, domain.upper, resolution)
    ]


def _normalize_resolution(domain: Domain, resolution) -> tuple[int, ...]:
    if np.isscalar(resolution):
        res = (int(resolution),) * domain.d
    else:
        res = tuple(int(n) for n in resolution)
    if len(res) != domain.d:
        raise DimensionError(f"resolution has {len(res)} axes, domain has {domain.d}")
    return res


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor midpoint rule: cell-center nodes with equal weights.

    Nodes are ordered C-style over the per-axis index, i.e. the last axis
    varies fastest, matching ``GridField.values.reshape(-1, C)``.
    """

    domain: Domain
    shape: tuple[int, ...]
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return int(self.weights.size)

    def integrate(self, values) -> np.ndarray:
        """Integrate nodal values of shape ``(Q,)`` or ``(Q, ...)``."""
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))


def midpoint_rule(domain: Domain, nodes_per_axis=None) -> QuadratureRule:
    if nodes_per_axis is None:
        nodes_per_axis = DEFAULT_NODES[domain.d]
    shape = _normalize_resolution(domain, nodes_per_axis)
    if min(shape) < 1:
        raise SizeError("quadrature needs at least one node per axis")
    axes = _cell_centers(domain, shape)
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    weights = np.full(nodes.shape[0], domain.volume / nodes.shape[0])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(domain, shape, nodes, weights)


def default_quadrature(domain: Domain) -> QuadratureRule:
    return midpoint_rule(domain, DEFAULT_NODES[domain.d])


class AnalyticField:
    """Closed-form field on a box, evaluated as ``field(x) -> (Q, C)``."""

    kind = "abstract"

    def __init__(self, domain: Domain, channels: int, smoothness: float):
        if channels < 1:
            raise ParameterError("a field needs at least one channel")
        self.domain = domain
        self.channels = int(channels)
        self.smoothness = float(smoothness)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.domain.d:
            raise DimensionError(f"points have d={x.shape[1]}, field has d={self.domain.d}")
        out = self._evaluate(x)
        return out[0] if single else out

    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind, "d": self.domain.d, "channels": self.channels,
                "s": self.smoothness}


class TaylorGreenField(AnalyticField):
    kind = "taylor-green"

    def __init__(self, domain: Domain):
        if domain.d != 2:
            raise DimensionError("the Taylor-Green field is defined for d=2 only")
        # infinitely smooth; s=4 is the declared class for rate predictions
        super().__init__(domain, channels=3, smoothness=4.0)

    def _evaluate(self, x):
        tx, ty = 2.0 * np.pi * x[:, 0], 2.0 * np.pi * x[:, 1]
        u = np.sin(tx) * np.cos(ty)
        v = -np.cos(tx) * np.sin(ty)
        p = 0.25 * (np.cos(2.0 * tx) + np.cos(2.0 * ty))
        return np.stack([u, v, p], axis=1)


class LambOseenField(AnalyticField):
    """Scalar vorticity of a Lamb-Oseen vortex, ``exp(-r^2/a^2) / (pi a^2)``."""

    kind = "lamb-oseen"

    def __init__(self, domain: Domain, core_radius: float, center):
        if domain.d != 2:
            raise DimensionError("the Lamb-Oseen field is defined for d=2 only")
        if not core_radius > 0:
            raise ParameterError("core radius must be positive")
        super().__init__(domain, channels=1, smoothness=4.0)
        self.core_radius = float(core_radius)
        self.center = np.asarray(center, dtype=np.float64).reshape(2)

    def _evaluate(self, x):
        a2 = self.core_radius**2
        r2 = ((x - self.center) ** 2).sum(axis=1)
        return (np.exp(-r2 / a2) / (np.pi * a2))[:, None]

    def describe(self):
        out = super().describe()
        out.update(core_radius=self.core_radius, center=self.center.tolist())
        return out


def half_lattice(d: int, modes: int) -> np.ndarray:
    """Integer wavevectors with ``|k|_inf <= modes``, one of each ``+-k`` pair."""
    rng = np.arange(-modes, modes + 1)
    grid = np.stack([g.ravel() for g in np.meshgrid(*([rng] * d), indexing="ij")], axis=1)
    keep = []
    for k in grid:
        nz = np.flatnonzero(k)
        if nz.size and k[nz[0]] > 0:
            keep.append(k)
    return np.array(keep, dtype=np.int64)


class FourierRandomField(AnalyticField):
    """Random cosine series ``sum_k c_k cos(2 pi k.x + phi_k)`` on the box.

    Coordinates are mapped to the unit box before evaluation, so the field is
    periodic over the domain.
    """

    kind = "fourier-random"

    def __init__(self, domain: Domain, s: float, modes: int, seed: int,
                 wavevectors: np.ndarray, coeffs: np.ndarray, phases: np.ndarray):
        channels = coeffs.shape[1] if coeffs.ndim == 2 else 1
        super().__init__(domain, channels=channels, smoothness=s)
        self.modes = int(modes)
        self.seed = int(seed)
        self.wavevectors = np.asarray(wavevectors, dtype=np.int64)
        self.coeffs = np.asarray(coeffs, dtype=np.float64).reshape(len(self.wavevectors), -1)
        self.phases = np.asarray(phases, dtype=np.float64).reshape(len(self.wavevectors), -1)
        for arr in (self.wavevectors, self.coeffs, self.phases):
            arr.setflags(write=False)

    def _evaluate(self, x):
        lo = np.asarray(self.domain.lower)
        u = (x - lo) / self.domain.extent
        kf = 2.0 * np.pi * self.wavevectors.astype(np.float64)
        out = np.empty((x.shape[0], self.channels))
        step = max(1, (1 << 21) // max(len(kf), 1))
        for start in range(0, x.shape[0], step):
            sl = slice(start, start + step)
            arg = u[sl] @ kf.T
            for c in range(self.channels):
                out[sl, c] = np.cos(arg + self.phases[:, c]) @ self.coeffs[:, c]
        return out

    def h_seminorm_sq(self, order: int = 2) -> float:
        """Squared ``H^order`` seminorm from the coefficients (unit box)."""
        kn = np.linalg.norm(self.wavevectors, axis=1)
        return float(((self.coeffs**2).sum(axis=1) * (2 * np.pi * kn) ** (2 * order)).sum() / 2)

    def l2_norm_sq(self) -> float:
        return float((self.coeffs**2).sum() / 2 * self.domain.volume)

    def describe(self):
        out = super().describe()
        out.update(modes=self.modes, seed=self.seed)
        return out


class FunctionField(AnalyticField):
    """Wrap an arbitrary vectorised callable ``fn(x) -> (Q,) | (Q, C)``."""

    def __init__(self, domain: Domain, fn: Callable, channels: int = 1,
                 smoothness: float = math.inf, kind: str = "custom"):
        super().__init__(domain, channels, smoothness)
        self.fn = fn
        self.kind = kind

    def _evaluate(self, x):
        out = np.asarray(self.fn(x), dtype=np.float64)
        return out.reshape(x.shape[0], self.channels)


def make_taylor_green(domain: Domain | None = None) -> TaylorGreenField:
    return TaylorGreenField(domain or Domain.unit(2))


def make_lamb_oseen(domain: Domain | None = None, core_radius: float = 0.05,
                    center=None) -> LambOseenField:
    domain = domain or Domain.unit(2)
    if center is None:
        center = domain.centroid
    return LambOseenField(domain, core_radius, center)


def make_fourier_random(domain: Domain | None = None, s: float = 1.0, modes: int = 16,
                        seed: int = 42, channels: int = 1) -> FourierRandomField:
    """Random field whose coefficients decay like ``|k|^-(s + d/2 + 1/2)``.

    Channel ``c`` draws amplitudes and phases from the counter streams
    ``(seed, FOURIER:2c)`` and ``(seed, FOURIER:2c+1)``.
    """
    domain = domain or Domain.unit(2)
    if not s > 0:
        raise ParameterError("smoothness s must be positive")
    if modes < 1:
        raise ParameterError("need at least one mode per axis")
    if channels < 1:
        raise ParameterError("need at least one channel")
    kvec = half_lattice(domain.d, modes)
    std = np.linalg.norm(kvec, axis=1) ** -(s + domain.d / 2 + 0.5)
    coeffs = np.empty((len(kvec), channels))
    phases = np.empty((len(kvec), channels))
    for c in range(channels):
        coeffs[:, c] = std * CounterStream(seed, stream_id(TAG_FOURIER, 2 * c)).normal(len(kvec))
        phases[:, c] = 2 * np.pi * CounterStream(seed, stream_id(TAG_FOURIER, 2 * c + 1)).uniform(len(kvec))
    return FourierRandomField(domain, s, modes, seed, kvec, coeffs, phases)


def make_constant(domain: Domain | None = None, value=1.0) -> FunctionField:
    domain = domain or Domain.unit(2)
    value = np.atleast_1d(np.asarray(value, dtype=np.float64))
    return FunctionField(domain, lambda x: np.broadcast_to(value, (x.shape[0], value.size)).copy(),
                         channels=value.size, kind="constant")


@dataclass(frozen=True)
class GridField:
    """Channel values sampled at the cell centers of a tensor grid.

    ``values`` has shape ``(*resolution, C)``; axis ``i`` of the array is
    coordinate ``x_{i+1}``.
    """

    domain: Domain
    resolution: tuple[int, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        res = tuple(int(n) for n in self.resolution)
        if vals.shape[:-1] != res or vals.ndim != len(res) + 1:
            raise DimensionError(f"values shape {vals.shape} does not match resolution {res}")
        if not np.all(np.isfinite(vals)):
            raise ParameterError("grid values must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "resolution", res)

    @property
    def channels(self) -> int:
        return self.values.shape[-1]

    def quadrature(self) -> QuadratureRule:
        return midpoint_rule(self.domain, self.resolution)

    def nodes(self) -> np.ndarray:
        return self.quadrature().nodes

    def flat(self) -> np.ndarray:
        """Values as ``(Q, C)`` in quadrature-node order."""
        return self.values.reshape(-1, self.channels)


def sample_grid(fld: AnalyticField, resolution) -> GridField:
    res = _normalize_resolution(fld.domain, resolution)
    if min(res) < 2:
        raise SizeError("grid sampling needs at least 2 cells per axis")
    q = midpoint_rule(fld.domain, res)
    vals = fld(q.nodes).reshape(*res, fld.channels)
    return GridField(fld.domain, res, vals)


def smooth_grid(g: GridField, sigma_px: float) -> GridField:
    """Separable Gaussian blur in pixel units, truncated at 4 sigma, reflective edges."""
    if sigma_px < 0:
        raise ParameterError("sigma_px must be non-negative")
    if sigma_px == 0:
        return GridField(g.domain, g.resolution, g.values)
    sigma = (float(sigma_px),) * len(g.resolution) + (0.0,)
    out = ndimage.gaussian_filter(g.values, sigma=sigma, mode="reflect", truncate=4.0)
    return GridField(g.domain, g.resolution, out)


def roughness(g: GridField) -> float:
    """``rms |grad f| / rms f`` over interior cells, central differences."""
    vals = g.values
    d = len(g.resolution)
    if min(g.resolution) < 3:
        raise SizeError("roughness needs at least 3 cells per axis")
    spacing = g.domain.extent / np.asarray(g.resolution)
    interior = tuple(slice(1, -1) for _ in range(d))
    grad_sq = np.zeros(tuple(n - 2 for n in g.resolution) + (g.channels,))
    for axis in range(d):
        fwd = [slice(1, -1)] * d
        bwd = [slice(1, -1)] * d
        fwd[axis] = slice(2, None)
        bwd[axis] = slice(None, -2)
        diff = (vals[tuple(fwd)] - vals[tuple(bwd)]) / (2.0 * spacing[axis])
        grad_sq += diff**2
    f_ms = float(np.mean((vals[interior] ** 2).sum(axis=-1)))
    if f_ms == 0.0:
        raise UndefinedRatioError("roughness of an identically zero field is undefined")
    g_ms = float(np.mean(grad_sq.sum(axis=-1)))
    return math.sqrt(g_ms / f_ms)


def _values_at(obj, q: QuadratureRule) -> np.ndarray:
    if isinstance(obj, GridField):
        if obj.resolution != q.shape or obj.domain != q.domain:
            raise DimensionError("grid field does not match the quadrature rule")
        return obj.flat()
    if callable(obj):
        out = np.asarray(obj(q.nodes), dtype=np.float64)
    else:
        out = np.asarray(obj, dtype=np.float64)
    if out.ndim == 1:
        out = out[:, None]
    if out.shape[0] != q.size:
        raise DimensionError("value array does not match the quadrature rule")
    return out


def l2_norm_sq(f, q: QuadratureRule) -> float:
    vals = _values_at(f, q)
    return float(q.weights @ (vals**2).sum(axis=1))


def rel_l2_error(f, g, q: QuadratureRule) -> float:
    """Relative L2 error of ``g`` against reference ``f``, channels pooled."""
    fv = _values_at(f, q)
    gv = _values_at(g, q)
    if fv.shape != gv.shape:
        raise DimensionError(f"channel mismatch: {fv.shape[1]} vs {gv.shape[1]}")
    ref = float(q.weights @ (fv**2).sum(axis=1))
    if ref == 0.0:
        raise UndefinedRatioError("reference field has zero L2 norm")
    err = float(q.weights @ ((fv - gv) ** 2).sum(axis=1))
    return math.sqrt(err / ref)
