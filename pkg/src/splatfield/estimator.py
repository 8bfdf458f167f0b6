"""Fixed-dictionary least squares, L2 projection and Monte-Carlo bias/variance."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg

from . import _kernels
from .centers import CenterSet
from .errors import ConditioningError, DimensionError, ParameterError, SizeError
from .field import Domain, QuadratureRule, _values_at, default_quadrature
from .primitives import PrimitiveSet, precision_matrices
from .rng import TAG_NOISE, CounterStream, stream_id

__all__ = [
    "Dictionary",
    "ObservationSet",
    "observe",
    "noise_draws",
    "design_matrix",
    "gram_matrix",
    "Projection",
    "project_l2",
    "LeastSquaresFit",
    "fit_least_squares",
    "default_ridge",
    "spectral_stability",
    "BiasVarianceReport",
    "bias_variance_mc",
    "optimal_k",
]

_GRAM_ROWS = 4096
_TRIAL_CHUNK = 25


@dataclass(frozen=True)
class Dictionary:
    """Fixed Gaussian dictionary ``V_K = span{phi_k}`` (no amplitudes)."""

    domain: Domain
    mu: np.ndarray = field(repr=False)
    sigma: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    precision: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mu = np.array(self.mu, dtype=np.float64, ndmin=2)
        K, d = mu.shape
        if K < 1:
            raise SizeError("a dictionary needs at least one function")
        if d != self.domain.d:
            raise DimensionError("dictionary centers do not match the domain")
        sigma = np.array(self.sigma, dtype=np.float64)
        if sigma.ndim == 0:
            sigma = np.full((K, d), float(sigma))
        elif sigma.ndim == 1 and sigma.size == K:
            sigma = np.repeat(sigma[:, None], d, axis=1)
        if sigma.shape != (K, d) or not np.all(sigma > 0):
            raise ParameterError("dictionary scales must be positive with shape (K, d)")
        theta = np.zeros(K) if self.theta is None else np.broadcast_to(
            np.asarray(self.theta, dtype=np.float64), (K,)).copy()
        for name, arr in (("mu", mu), ("sigma", sigma), ("theta", theta)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        prec = np.ascontiguousarray(precision_matrices(sigma, theta))
        prec.setflags(write=False)
        object.__setattr__(self, "precision", prec)

    @property
    def K(self) -> int:
        return self.mu.shape[0]

    @classmethod
    def from_centers(cls, cs: CenterSet, scale_factor: float = 1.0) -> "Dictionary":
        """Isotropic dictionary with ``sigma = scale_factor * h_K``."""
        return cls(cs.domain, cs.centers, np.full(cs.K, scale_factor * cs.h), None)

    @classmethod
    def from_primitives(cls, ps: PrimitiveSet) -> "Dictionary":
        return cls(ps.domain, ps.mu, ps.sigma, ps.theta)

    def evaluate(self, x) -> np.ndarray:
        x = np.ascontiguousarray(np.atleast_2d(np.asarray(x, dtype=np.float64)))
        return _kernels.backend.basis_matrix(x, self.mu, self.precision, _kernels.get_num_threads())


@dataclass(frozen=True)
class ObservationSet:
    """Sensor locations with clean values and one noisy realisation ``y = f + eps``."""

    locations: np.ndarray = field(repr=False)
    clean: np.ndarray = field(repr=False)
    sigma_noise: float
    seed: int
    trial: int
    readings: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return self.locations.shape[0]


def noise_draws(seed: int, trial: int, N: int, C: int) -> np.ndarray:
    """Standard-normal noise for one trial, stream ``(seed, NOISE:trial)``."""
    return CounterStream(seed, stream_id(TAG_NOISE, trial)).normal(N * C).reshape(N, C)


def observe(fld, locations, sigma_noise: float = 0.0, seed: int = 42, trial: int = 0) -> ObservationSet:
    loc = np.array(locations, dtype=np.float64, ndmin=2)
    if loc.shape[0] < 1:
        raise SizeError("need at least one sensor")
    if sigma_noise < 0:
        raise ParameterError("noise level must be non-negative")
    clean = np.asarray(fld(loc), dtype=np.float64).reshape(loc.shape[0], -1)
    y = clean + sigma_noise * noise_draws(seed, trial, *clean.shape)
    return ObservationSet(loc, clean, float(sigma_noise), int(seed), int(trial), y)


def design_matrix(dictionary: Dictionary, obs) -> np.ndarray:
    """``A[i, j] = phi_j(x_i)`` for sensors ``x_i`` (an ObservationSet or an array)."""
    loc = obs.locations if isinstance(obs, ObservationSet) else obs
    return dictionary.evaluate(loc)


def _basis_chunks(dictionary: Dictionary, q: QuadratureRule):
    for start in range(0, q.size, _GRAM_ROWS):
        sl = slice(start, min(q.size, start + _GRAM_ROWS))
        yield sl, dictionary.evaluate(q.nodes[sl])


def _basis_at_nodes(dictionary: Dictionary, q: QuadratureRule) -> np.ndarray:
    phi = np.empty((q.size, dictionary.K))
    for sl, chunk in _basis_chunks(dictionary, q):
        phi[sl] = chunk
    return phi


def gram_matrix(dictionary: Dictionary, q: QuadratureRule | None = None) -> np.ndarray:
    """``G[j, l] = int phi_j phi_l`` by quadrature; exactly symmetric."""
    q = q or default_quadrature(dictionary.domain)
    G = np.zeros((dictionary.K, dictionary.K))
    for sl, phi in _basis_chunks(dictionary, q):
        scaled = phi * np.sqrt(q.weights[sl])[:, None]
        G += scaled.T @ scaled
    return 0.5 * (G + G.T)


def _cholesky(M: np.ndarray, what: str):
    try:
        return linalg.cho_factor(M, lower=True, check_finite=True)
    except linalg.LinAlgError:
        pivot = float(np.linalg.eigvalsh(M).min())
        raise ConditioningError(f"{what} is not numerically positive definite", pivot) from None


@dataclass(frozen=True)
class Projection:
    """L2 projection ``f*_K``: coefficients ``(K, C)``, load vector and nodal values."""

    coeffs: np.ndarray
    load: np.ndarray
    values: np.ndarray
    orthogonality: float


def project_l2(fld, dictionary: Dictionary, G: np.ndarray | None = None,
               q: QuadratureRule | None = None, ridge: float = 0.0) -> Projection:
    """Solve ``G c = b`` with ``b_j = int f phi_j`` on the same quadrature."""
    q = q or default_quadrature(dictionary.domain)
    if G is None:
        G = gram_matrix(dictionary, q)
    fv = _values_at(fld, q)
    K = dictionary.K
    phi_nodes = _basis_at_nodes(dictionary, q)
    b = phi_nodes.T @ (q.weights[:, None] * fv)
    cho = _cholesky(G + ridge * np.eye(K), "Gram matrix")
    c = linalg.cho_solve(cho, b)
    resid = b - G @ c
    scale = max(float(np.linalg.norm(b)), np.finfo(float).tiny)
    return Projection(c, b, phi_nodes @ c, float(np.abs(resid).max() / scale))


def default_ridge(AtA: np.ndarray, N: int) -> float:
    """Zero for well-posed designs, else ``1e-10 * trace(A^T A) / K``."""
    K = AtA.shape[0]
    ev = np.linalg.eigvalsh(AtA)
    cond = math.inf if ev[0] <= 0 else ev[-1] / ev[0]
    if N < K or cond > 1e12:
        return 1e-10 * float(np.trace(AtA)) / K
    return 0.0


@dataclass(frozen=True)
class LeastSquaresFit:
    """Least-squares coefficients ``(K, C)`` with conditioning diagnostics."""

    coeffs: np.ndarray
    ridge: float
    condition: float
    residual_norm: np.ndarray
    rank: int
    interpolatory: bool

    def to_dict(self) -> dict:
        out = asdict(self)
        out["coeffs"] = self.coeffs.tolist()
        out["residual_norm"] = self.residual_norm.tolist()
        return out


class _NormalSolver:
    """Cholesky factor of ``A^T A + ridge I`` reused across right-hand sides."""

    def __init__(self, A: np.ndarray, ridge: float | None):
        N, K = A.shape
        AtA = A.T @ A
        AtA = 0.5 * (AtA + AtA.T)
        if ridge is None:
            ridge = default_ridge(AtA, N)
        if ridge < 0:
            raise ParameterError("ridge must be non-negative")
        M = AtA + ridge * np.eye(K)
        ev = np.linalg.eigvalsh(M)
        self.condition = math.inf if ev[0] <= 0 else float(ev[-1] / ev[0])
        if ridge == 0 and not self.condition < 1.0 / np.finfo(float).eps:
            raise ConditioningError("normal matrix is singular without ridge", float(ev[0]))
        self.A = A
        self.ridge = float(ridge)
        self.cho = _cholesky(M, "normal matrix")

    def solve(self, y: np.ndarray) -> np.ndarray:
        return linalg.cho_solve(self.cho, self.A.T @ y)


def fit_least_squares(A, obs, ridge: float | None = None) -> LeastSquaresFit:
    """``c = (A^T A + ridge I)^-1 A^T y`` per channel via Cholesky."""
    A = np.asarray(A, dtype=np.float64)
    y = obs.readings if isinstance(obs, ObservationSet) else np.asarray(obs, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape[0] != A.shape[0]:
        raise DimensionError("observation count does not match the design matrix")
    solver = _NormalSolver(A, ridge)
    c = solver.solve(y)
    resid = np.linalg.norm(A @ c - y, axis=0)
    rank = int(np.linalg.matrix_rank(A))
    return LeastSquaresFit(c, solver.ridge, solver.condition, resid, rank, rank == A.shape[0])


def spectral_stability(A, G, N: int | None = None, volume: float = 1.0) -> tuple[float, float]:
    """Extreme generalised eigenvalues of ``((|Omega|/N) A^T A, G)``."""
    A = np.asarray(A, dtype=np.float64)
    G = np.asarray(G, dtype=np.float64)
    N = A.shape[0] if N is None else N
    K = G.shape[0]
    Gs = 0.5 * (G + G.T)
    jitter = 1e-12 * float(np.trace(Gs)) / K
    try:
        L = linalg.cholesky(Gs + jitter * np.eye(K), lower=True)
    except linalg.LinAlgError:
        raise ConditioningError("Gram matrix is indefinite",
                                float(np.linalg.eigvalsh(Gs).min())) from None
    S = (volume / N) * (A.T @ A)
    W = linalg.solve_triangular(L, S, lower=True)
    M = linalg.solve_triangular(L, W.T, lower=True)
    ev = np.linalg.eigvalsh(0.5 * (M + M.T))
    return float(ev[0]), float(ev[-1])


@dataclass(frozen=True)
class BiasVarianceReport:
    """Monte-Carlo risk decomposition of the least-squares estimator.

    ``bias2 = ||f - E f_hat||^2`` splits exactly into ``approx_bias2 =
    ||f - f*_K||^2`` (projection error) plus ``residual2 = ||f*_K - E f_hat||^2``
    (sensor-sampling residual). ``variance`` is the Monte-Carlo mean of
    ``||f_hat - E f_hat||^2`` and ``total`` of ``||f - f_hat||^2``.
    """

    K: int
    N: int
    sigma_noise: float
    trials: int
    seed: int
    bias2: float
    approx_bias2: float
    residual2: float
    variance: float
    variance_exact: float
    total: float
    total_se: float
    ridge: float
    condition: float
    c_low: float
    c_high: float
    sensor_residual_rms: float
    residual_l2: float
    field_norm2: float

    @property
    def decomposition_gap(self) -> float:
        return self.total - self.bias2 - self.variance

    def to_dict(self) -> dict:
        return asdict(self)


def bias_variance_mc(fld, dictionary: Dictionary, sensors, sigma_noise: float,
                     trials: int = 200, q: QuadratureRule | None = None, seed: int = 42,
                     ridge: float | None = None, G: np.ndarray | None = None) -> BiasVarianceReport:
    """Decompose ``E||f - f_hat_K||^2`` over ``trials`` independent noise draws.

    Trial ``t`` uses the noise stream ``(seed, NOISE:t)`` for every K and
    every noise level, so comparisons across either share random numbers.
    """
    if trials < 2:
        raise SizeError("need at least two Monte-Carlo trials")
    if sigma_noise < 0:
        raise ParameterError("noise level must be non-negative")
    q = q or default_quadrature(dictionary.domain)
    sensors = np.ascontiguousarray(np.atleast_2d(np.asarray(sensors, dtype=np.float64)))
    N, K = sensors.shape[0], dictionary.K
    if G is None:
        G = gram_matrix(dictionary, q)
    fv = _values_at(fld, q)
    C = fv.shape[1]
    w = q.weights

    def sqnorm(vals):
        # vals: (Q, ...) -> weighted squared L2 norm pooled over channels
        return np.tensordot(w, vals**2, axes=(0, 0))

    proj = project_l2(fv, dictionary, G, q)
    phi_nodes = _basis_at_nodes(dictionary, q)
    f_star = proj.values
    approx_bias2 = float(sqnorm(fv - f_star).sum())

    A = design_matrix(dictionary, sensors)
    clean = np.asarray(fld(sensors), dtype=np.float64).reshape(N, C)
    solver = _NormalSolver(A, ridge)
    c_mean = solver.solve(clean)
    f_mean = phi_nodes @ c_mean
    residual2 = float(sqnorm(f_star - f_mean).sum())
    bias2 = float(sqnorm(fv - f_mean).sum())

    var_t = np.empty(trials)
    tot_t = np.empty(trials)
    for start in range(0, trials, _TRIAL_CHUNK):
        ts = range(start, min(trials, start + _TRIAL_CHUNK))
        Y = np.stack([clean + sigma_noise * noise_draws(seed, t, N, C) for t in ts], axis=2)
        chat = solver.solve(Y.reshape(N, -1)).reshape(K, C, len(ts))
        fhat = np.einsum("qk,kct->qct", phi_nodes, chat)
        var_t[start:start + len(ts)] = sqnorm(fhat - f_mean[:, :, None]).sum(axis=0)
        tot_t[start:start + len(ts)] = sqnorm(fv[:, :, None] - fhat).sum(axis=0)

    # exact noise term sigma^2 tr(P^T G P) per channel, P = (A^T A + ridge)^-1 A^T
    P = linalg.cho_solve(solver.cho, A.T)
    variance_exact = float(C * sigma_noise**2 * np.einsum("ki,kl,li->", P, G, P))

    c_low, c_high = spectral_stability(A, G, N, dictionary.domain.volume)
    r_sensor = clean - A @ proj.coeffs
    return BiasVarianceReport(
        K=K, N=N, sigma_noise=float(sigma_noise), trials=int(trials), seed=int(seed),
        bias2=bias2, approx_bias2=approx_bias2, residual2=residual2,
        variance=float(var_t.mean()), variance_exact=variance_exact,
        total=float(tot_t.mean()), total_se=float(tot_t.std(ddof=1) / math.sqrt(trials)),
        ridge=solver.ridge, condition=solver.condition, c_low=c_low, c_high=c_high,
        sensor_residual_rms=float(np.sqrt((r_sensor**2).sum() / N)),
        residual_l2=math.sqrt(approx_bias2),
        field_norm2=float(sqnorm(fv).sum()),
    )


def optimal_k(N: float, sigma_noise: float, d: int, s: float, field_norm: float = 1.0) -> tuple[float, int]:
    """Capacity scale ``(N/sigma^2)^(d/(2s+d)) * ||f||^(2d/(2s+d))`` with unit constants.

    Returns the real value and its half-up rounding, floored at 1.
    """
    if min(N, sigma_noise, d, s, field_norm) <= 0:
        raise ParameterError("optimal_k arguments must be positive")
    expo = d / (2.0 * s + d)
    kstar = (N / sigma_noise**2) ** expo * field_norm ** (2.0 * expo)
    return kstar, max(1, int(math.floor(kstar + 0.5)))
