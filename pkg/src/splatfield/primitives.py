"""Gaussian primitives and the Shepard-normalised partition-of-unity scaffold."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .centers import CenterSet
from .errors import DegenerateSupportError, DimensionError, ParameterError
from .field import Domain

__all__ = [
    "PrimitiveSet",
    "ScaffoldEval",
    "basis_eval",
    "shepard_weights",
    "partition_sums",
    "eval_scaffold",
    "oracle_scaffold",
    "moment_sum",
    "precision_matrices",
    "denominator_floor",
    "DEFAULT_FLOOR",
    "UNDERFLOW_MASS",
]

DEFAULT_FLOOR = 1e-30
UNDERFLOW_MASS = 1e-250


def denominator_floor() -> float:
    """Additive floor for Shepard denominators; ``SPLATFIELD_DENOM_FLOOR`` overrides."""
    raw = os.environ.get("SPLATFIELD_DENOM_FLOOR")
    return DEFAULT_FLOOR if raw is None else float(raw)


def precision_matrices(sigma: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Stack of ``R_theta^T diag(sigma^-2) R_theta`` (rotation only in 2-D)."""
    K, d = sigma.shape
    inv2 = sigma**-2.0
    if d == 2:
        c, s = np.cos(theta), np.sin(theta)
        rot = np.empty((K, 2, 2))
        rot[:, 0, 0], rot[:, 0, 1] = c, -s
        rot[:, 1, 0], rot[:, 1, 1] = s, c
        return np.einsum("kji,kj,kjl->kil", rot, inv2, rot)
    prec = np.zeros((K, d, d))
    idx = np.arange(d)
    prec[:, idx, idx] = inv2
    return prec


@dataclass(frozen=True)
class PrimitiveSet:
    """Gaussian state: centers, axis scales, rotation, weights and amplitudes.

    ``a`` has shape ``(K, C)``. ``theta`` must be zero in 3-D.
    """

    domain: Domain
    mu: np.ndarray = field(repr=False)
    sigma: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    a: np.ndarray = field(repr=False)
    sigma_bounds: tuple[float, float] = (0.0, math.inf)
    metadata: dict = field(default_factory=dict)
    precision: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        d = self.domain.d
        mu = np.array(self.mu, dtype=np.float64, ndmin=2)
        K = mu.shape[0]
        sigma = np.array(self.sigma, dtype=np.float64)
        if sigma.ndim == 0:
            sigma = np.full((K, d), float(sigma))
        elif sigma.ndim == 1 and sigma.size == K:
            # one isotropic scale per primitive
            sigma = np.repeat(sigma[:, None], d, axis=1)
        theta = np.zeros(K) if self.theta is None else np.broadcast_to(
            np.asarray(self.theta, dtype=np.float64), (K,)).copy()
        w = np.broadcast_to(np.asarray(self.w, dtype=np.float64), (K,)).copy()
        a = np.array(self.a, dtype=np.float64)
        if a.ndim == 1:
            a = a[:, None]
        if mu.shape[1] != d or sigma.shape != (K, d) or a.shape[0] != K:
            raise DimensionError("primitive arrays disagree on K or d")
        if not np.all(sigma > 0):
            raise ParameterError("axis scales must be positive")
        lo, hi = self.sigma_bounds
        if np.any(sigma < lo) or np.any(sigma > hi):
            raise ParameterError(f"axis scales outside [{lo}, {hi}]")
        if not np.all((w > 0) & (w < 1)):
            raise ParameterError("weights must lie in (0, 1)")
        if d == 3 and np.any(theta != 0):
            raise ParameterError("rotation is only supported in 2-D")
        for name, arr in (("mu", mu), ("sigma", sigma), ("theta", theta), ("w", w), ("a", a)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        prec = np.ascontiguousarray(precision_matrices(sigma, theta))
        prec.setflags(write=False)
        object.__setattr__(self, "precision", prec)

    @property
    def K(self) -> int:
        return self.mu.shape[0]

    @property
    def channels(self) -> int:
        return self.a.shape[1]

    def with_amplitudes(self, a) -> "PrimitiveSet":
        return PrimitiveSet(self.domain, self.mu, self.sigma, self.theta, self.w, a,
                            self.sigma_bounds, dict(self.metadata))

    def to_dict(self) -> dict:
        return {
            "domain": self.domain.to_dict(),
            "mu": self.mu.tolist(),
            "sigma": self.sigma.tolist(),
            "theta": self.theta.tolist(),
            "w": self.w.tolist(),
            "a": self.a.tolist(),
            "sigma_bounds": [self.sigma_bounds[0], _inf_to_str(self.sigma_bounds[1])],
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        # json writes floats with repr, which round-trips finite doubles exactly
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "PrimitiveSet":
        lo, hi = data.get("sigma_bounds", [0.0, "inf"])
        return cls(Domain.from_dict(data["domain"]), np.array(data["mu"]), np.array(data["sigma"]),
                   np.array(data["theta"]), np.array(data["w"]), np.array(data["a"]),
                   (float(lo), float(hi)), dict(data.get("metadata", {})))

    @classmethod
    def from_json(cls, text: str) -> "PrimitiveSet":
        return cls.from_dict(json.loads(text))


def _inf_to_str(v):
    return "inf" if math.isinf(v) else v


@dataclass(frozen=True)
class ScaffoldEval:
    """Scaffold values ``(Q, C)`` and basis mass ``(Q,)`` at a batch of queries."""

    values: np.ndarray
    mass: np.ndarray


def _queries(ps: PrimitiveSet, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = np.ascontiguousarray(np.atleast_2d(x))
    if x.shape[1] != ps.domain.d:
        raise DimensionError(f"query dimension {x.shape[1]} != {ps.domain.d}")
    return x, single


def _check_mass(x, mass):
    bad = np.flatnonzero(mass < UNDERFLOW_MASS)
    if bad.size:
        raise DegenerateSupportError(x[bad[0]], mass[bad[0]])


def basis_eval(ps: PrimitiveSet, x) -> np.ndarray:
    """Unnormalised Gaussians ``phi_k(x)``: shape ``(K,)`` or ``(Q, K)``."""
    x, single = _queries(ps, x)
    out = _kernels.backend.basis_matrix(x, ps.mu, ps.precision, _kernels.get_num_threads())
    return out[0] if single else out


def shepard_weights(ps: PrimitiveSet, x) -> np.ndarray:
    x, single = _queries(ps, x)
    wphi = ps.w * _kernels.backend.basis_matrix(x, ps.mu, ps.precision, _kernels.get_num_threads())
    mass = wphi.sum(axis=1)
    _check_mass(x, mass)
    psi = wphi / (mass + denominator_floor())[:, None]
    return psi[0] if single else psi


def partition_sums(ps: PrimitiveSet, x) -> tuple[np.ndarray, np.ndarray]:
    """``sum_k psi_k(x)`` and the basis mass, without forming the weight matrix."""
    x, _ = _queries(ps, x)
    total, mass = _kernels.backend.shepard_weight_sums(
        x, ps.mu, ps.precision, ps.w, denominator_floor(), _kernels.get_num_threads())
    _check_mass(x, mass)
    return total, mass


def eval_scaffold(ps: PrimitiveSet, queries) -> ScaffoldEval:
    """``f_prim(x) = sum_k psi_k(x) a_k`` with the basis mass ``m(x)``."""
    x, _ = _queries(ps, queries)
    values, mass = _kernels.backend.shepard_eval(
        x, ps.mu, ps.precision, ps.w, np.ascontiguousarray(ps.a), denominator_floor(),
        _kernels.get_num_threads())
    _check_mass(x, mass)
    return ScaffoldEval(values, mass)


def moment_sum(ps: PrimitiveSet, x, m: float) -> np.ndarray | float:
    """``sum_k psi_k(x) |x - mu_k|^m``."""
    if m < 0:
        raise ParameterError("moment order must be non-negative")
    x, single = _queries(ps, x)
    moments, mass = _kernels.backend.moment_sum(
        x, ps.mu, ps.precision, ps.w, float(m), denominator_floor(), _kernels.get_num_threads())
    _check_mass(x, mass)
    return float(moments[0]) if single else moments


def oracle_scaffold(fld, cs: CenterSet, scale_factor: float = 1.0, weight: float = 0.5,
                    amplitudes=None) -> PrimitiveSet:
    """Isotropic scaffold with ``sigma = scale_factor * h_K`` and ``a_k = f(mu_k)``.

    ``amplitudes`` overrides the point evaluation (used for gridded data whose
    centers coincide with grid cells).
    """
    if not scale_factor > 0:
        raise ParameterError("scale factor must be positive")
    if amplitudes is None:
        amplitudes = fld(cs.centers)
    a = np.asarray(amplitudes, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    sigma = np.full((cs.K, cs.domain.d), scale_factor * cs.h)
    ps = PrimitiveSet(cs.domain, cs.centers, sigma, np.zeros(cs.K), np.full(cs.K, weight), a,
                      metadata={"c_sigma": scale_factor, "h_K": cs.h})
    # every default-quadrature node is within h of a center, so the mass there
    # is at least w * exp(-1 / (2 c^2)); fall back to a full check if that underflows
    if weight * math.exp(-0.5 / scale_factor**2) < UNDERFLOW_MASS:
        from .field import default_quadrature

        partition_sums(ps, default_quadrature(cs.domain).nodes)
    return ps
